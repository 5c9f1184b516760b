//! Web service registry and workflow placement.
//!
//! A workflow is a linear chain of service types. Placement assigns each
//! step to a registered instance with spare capacity and routes every hop
//! (origin to first step, step to step, last step to destination) with the
//! path selector. [`schedule_workflow`] is a greedy forward pass;
//! [`exhaustive_schedule`] enumerates every assignment and serves as the
//! reference for measuring the greedy optimality gap.
//!
//! Load is a unit counter: a placement takes one unit per step from the
//! chosen instance and gives it back on release. Scheduling is atomic; a
//! failed call leaves every load untouched.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{NodeRef, PathMetrics, RttOverride, Topology};
use crate::pathfinder::{best_route, Objective, RouteError, RoutePlan, TransferPolicy};

/// Exhaustive search bounds.
pub const EXHAUSTIVE_MAX_STEPS: usize = 4;
pub const EXHAUSTIVE_MAX_CANDIDATES: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceInstance {
    pub id: String,
    pub service_type: String,
    pub region: String,
    pub capacity_units: u32,
    #[serde(default)]
    pub load_units: u32,
}

impl ServiceInstance {
    pub fn spare(&self) -> u32 {
        self.capacity_units.saturating_sub(self.load_units)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workflow {
    pub id: String,
    pub steps: Vec<String>,
    pub origin: String,
    pub destination: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_total_rtt_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub allow_loopback: bool,
}

/// One routed leg of a placement. `route` is `None` when both ends sit in
/// the same region, which costs nothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hop {
    pub from: NodeRef,
    pub to: NodeRef,
    pub route: Option<RoutePlan>,
}

impl Hop {
    pub fn rtt_ms(&self) -> f64 {
        self.route.as_ref().map_or(0.0, |r| r.metrics.rtt_ms)
    }

    fn metrics(&self) -> PathMetrics {
        match &self.route {
            Some(r) => r.metrics,
            None => PathMetrics { bottleneck_mbps: f64::INFINITY, rtt_ms: 0.0, jitter_ms: 0.0, loss_prob: 0.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub workflow_id: String,
    /// Registry-issued handle used to release the placement.
    pub ticket: u64,
    pub assignments: Vec<String>,
    pub hops: Vec<Hop>,
    pub total_rtt_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("service instance `{0}` is already registered")]
    DuplicateInstance(String),
    #[error("service instance `{0}` is invalid: {1}")]
    InvalidInstance(String, String),
    #[error("invalid workflow `{0}`: {1}")]
    InvalidWorkflow(String, String),
    #[error("no registered instance provides service `{0}`")]
    UnknownService(String),
    #[error("no spare capacity for step {step} (`{service_type}`)")]
    CapacityExhausted { step: usize, service_type: String },
    #[error("workflow needs {achieved_rtt_ms} ms, above its {limit_ms} ms limit")]
    SloViolation { achieved_rtt_ms: f64, limit_ms: f64, placement: Box<Placement> },
    #[error("routing failed: {0}")]
    Route(#[from] RouteError),
    #[error("placement {0} is not applied")]
    NotApplied(u64),
    #[error("exhaustive search supports {EXHAUSTIVE_MAX_STEPS} steps and {EXHAUSTIVE_MAX_CANDIDATES} instances per step")]
    TooLarge,
}

/// Service registry. Writers hold `&mut`, so updates are serialized; use
/// [`Registry::snapshot`] to hand read-only copies to concurrent readers.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    instances: BTreeMap<String, ServiceInstance>,
    active: HashMap<u64, Vec<String>>,
    rolled_back: HashSet<u64>,
    next_ticket: u64,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_instances(instances: impl IntoIterator<Item = ServiceInstance>) -> Result<Self, ScheduleError> {
        let mut r = Registry::new();
        for inst in instances {
            r.register_service(inst)?;
        }
        Ok(r)
    }

    pub fn from_json(text: &str) -> Result<Self, RegistryFileError> {
        let instances: Vec<ServiceInstance> = serde_json::from_str(text)?;
        Ok(Self::from_instances(instances)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.snapshot()).expect("registry serializes")
    }

    pub fn register_service(&mut self, inst: ServiceInstance) -> Result<(), ScheduleError> {
        if inst.id.is_empty() {
            return Err(ScheduleError::InvalidInstance(inst.id, "id must be nonempty".into()));
        }
        if inst.capacity_units == 0 {
            return Err(ScheduleError::InvalidInstance(inst.id, "capacity_units must be positive".into()));
        }
        if inst.load_units > inst.capacity_units {
            return Err(ScheduleError::InvalidInstance(inst.id, "load_units exceeds capacity_units".into()));
        }
        if self.instances.contains_key(&inst.id) {
            return Err(ScheduleError::DuplicateInstance(inst.id));
        }
        self.instances.insert(inst.id.clone(), inst);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&ServiceInstance> {
        self.instances.get(id)
    }

    /// Instances providing `service_type`, ordered by id.
    pub fn by_type<'a>(&'a self, service_type: &'a str) -> impl Iterator<Item = &'a ServiceInstance> + 'a {
        self.instances.values().filter(move |i| i.service_type == service_type)
    }

    pub fn instances(&self) -> impl Iterator<Item = &ServiceInstance> {
        self.instances.values()
    }

    pub fn snapshot(&self) -> Vec<ServiceInstance> {
        self.instances.values().cloned().collect()
    }

    pub fn active_placements(&self) -> usize {
        self.active.len()
    }

    fn issue_ticket(&mut self) -> u64 {
        self.next_ticket += 1;
        self.next_ticket
    }

    fn apply(&mut self, ticket: u64, assignments: &[String]) {
        for id in assignments {
            let inst = self.instances.get_mut(id).expect("assigned instance is registered");
            debug_assert!(inst.load_units < inst.capacity_units);
            inst.load_units += 1;
        }
        self.active.insert(ticket, assignments.to_vec());
    }
}

#[derive(Debug, Error)]
pub enum RegistryFileError {
    #[error("malformed registry file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Invalid(#[from] ScheduleError),
}

/// Gives back the load a placement took. Releasing a placement whose
/// scheduling failed is a no-op.
pub fn release_workflow(registry: &mut Registry, p: &Placement) -> Result<(), ScheduleError> {
    if let Some(assigned) = registry.active.remove(&p.ticket) {
        for id in assigned {
            let inst = registry.instances.get_mut(&id).expect("assigned instance is registered");
            inst.load_units -= 1;
        }
        Ok(())
    } else if registry.rolled_back.contains(&p.ticket) {
        Ok(())
    } else {
        Err(ScheduleError::NotApplied(p.ticket))
    }
}

/// Memoizes best routes between node pairs for one scheduling call.
struct HopRouter<'a> {
    topology: &'a Topology,
    rtts: &'a dyn RttOverride,
    policy: &'a TransferPolicy,
    cache: HashMap<(NodeRef, NodeRef), Result<Hop, RouteError>>,
}

impl<'a> HopRouter<'a> {
    fn new(topology: &'a Topology, rtts: &'a dyn RttOverride, policy: &'a TransferPolicy) -> Self {
        Self { topology, rtts, policy, cache: HashMap::new() }
    }

    fn hop(&mut self, from: &NodeRef, to: &NodeRef) -> Result<Hop, RouteError> {
        if from == to {
            return Ok(Hop { from: from.clone(), to: to.clone(), route: None });
        }
        let key = (from.clone(), to.clone());
        if let Some(hit) = self.cache.get(&key) {
            return hit.clone();
        }
        let result = best_route(self.topology, from, to, self.policy, None, self.rtts)
            .map(|plan| Hop { from: from.clone(), to: to.clone(), route: Some(plan) });
        self.cache.insert(key, result.clone());
        result
    }
}

fn validate_workflow(t: &Topology, w: &Workflow) -> Result<(), ScheduleError> {
    let invalid = |msg: &str| Err(ScheduleError::InvalidWorkflow(w.id.clone(), msg.to_string()));
    if w.steps.is_empty() {
        return invalid("workflow has no steps");
    }
    if w.origin == w.destination && !w.allow_loopback {
        return invalid("origin and destination are the same endpoint");
    }
    if let Some(limit) = w.max_total_rtt_ms {
        if limit.is_nan() || limit < 0.0 {
            return invalid("max_total_rtt_ms must be nonnegative");
        }
    }
    for e in [&w.origin, &w.destination] {
        if t.endpoint(e).is_none() {
            return Err(RouteError::UnknownEndpoint(e.clone()).into());
        }
    }
    Ok(())
}

fn region_node(inst: &ServiceInstance) -> NodeRef {
    NodeRef::region(&inst.region)
}

/// `Less` when hop `a` serves the objective strictly better than `b`.
fn hop_order(objective: Objective, a: &Hop, b: &Hop) -> std::cmp::Ordering {
    objective.compare(&a.metrics(), &b.metrics())
}

fn finish(
    registry: &mut Registry,
    w: &Workflow,
    assignments: Vec<String>,
    hops: Vec<Hop>,
) -> Result<Placement, ScheduleError> {
    let total_rtt_ms = hops.iter().map(Hop::rtt_ms).sum();
    let ticket = registry.issue_ticket();
    let placement = Placement { workflow_id: w.id.clone(), ticket, assignments, hops, total_rtt_ms };
    if let Some(limit) = w.max_total_rtt_ms {
        if total_rtt_ms > limit {
            registry.rolled_back.insert(ticket);
            return Err(ScheduleError::SloViolation {
                achieved_rtt_ms: total_rtt_ms,
                limit_ms: limit,
                placement: Box::new(placement),
            });
        }
    }
    registry.apply(ticket, &placement.assignments);
    Ok(placement)
}

/// Greedy forward placement: each step takes the instance with spare
/// capacity whose incoming hop best serves the policy objective (ties to
/// the smallest instance id).
pub fn schedule_workflow(
    registry: &mut Registry,
    t: &Topology,
    rtts: &dyn RttOverride,
    w: &Workflow,
    policy: &TransferPolicy,
) -> Result<Placement, ScheduleError> {
    validate_workflow(t, w)?;
    let mut router = HopRouter::new(t, rtts, policy);
    // Tentative loads; the registry is only touched once the placement holds.
    let mut taken: HashMap<&str, u32> = HashMap::new();
    let mut at = NodeRef::endpoint(&w.origin);
    let mut assignments = Vec::with_capacity(w.steps.len());
    let mut hops = Vec::with_capacity(w.steps.len() + 1);

    for (step, service_type) in w.steps.iter().enumerate() {
        let mut any = false;
        let mut spare_any = false;
        let mut last_route_err = None;
        let mut best: Option<(&ServiceInstance, Hop)> = None;
        for inst in registry.by_type(service_type) {
            any = true;
            if inst.spare() <= taken.get(inst.id.as_str()).copied().unwrap_or(0) {
                continue;
            }
            spare_any = true;
            let hop = match router.hop(&at, &region_node(inst)) {
                Ok(h) => h,
                Err(e) => {
                    last_route_err = Some(e);
                    continue;
                }
            };
            let better = match &best {
                None => true,
                Some((_, cur)) => hop_order(policy.objective, &hop, cur) == std::cmp::Ordering::Less,
            };
            if better {
                best = Some((inst, hop));
            }
        }
        let Some((inst, hop)) = best else {
            return Err(if !any {
                ScheduleError::UnknownService(service_type.clone())
            } else if !spare_any {
                ScheduleError::CapacityExhausted { step, service_type: service_type.clone() }
            } else {
                ScheduleError::Route(last_route_err.expect("a candidate failed routing"))
            });
        };
        *taken.entry(inst.id.as_str()).or_default() += 1;
        at = region_node(inst);
        assignments.push(inst.id.clone());
        hops.push(hop);
    }
    hops.push(router.hop(&at, &NodeRef::endpoint(&w.destination))?);
    finish(registry, w, assignments, hops)
}

/// Reference placement: tries every capacity-feasible assignment and keeps
/// the one with the lowest total RTT (ties to the lexicographically
/// smallest assignment list).
pub fn exhaustive_schedule(
    registry: &mut Registry,
    t: &Topology,
    rtts: &dyn RttOverride,
    w: &Workflow,
    policy: &TransferPolicy,
) -> Result<Placement, ScheduleError> {
    validate_workflow(t, w)?;
    if w.steps.len() > EXHAUSTIVE_MAX_STEPS {
        return Err(ScheduleError::TooLarge);
    }
    let candidates: Vec<Vec<&ServiceInstance>> = w.steps.iter().map(|s| registry.by_type(s).collect()).collect();
    for (s, c) in w.steps.iter().zip(&candidates) {
        if c.is_empty() {
            return Err(ScheduleError::UnknownService(s.clone()));
        }
        if c.len() > EXHAUSTIVE_MAX_CANDIDATES {
            return Err(ScheduleError::TooLarge);
        }
    }

    let mut router = HopRouter::new(t, rtts, policy);
    let origin = NodeRef::endpoint(&w.origin);
    let destination = NodeRef::endpoint(&w.destination);
    let mut best: Option<(f64, Vec<String>, Vec<Hop>)> = None;
    let mut any_capacity_ok = false;
    let mut last_route_err = None;

    let total: usize = candidates.iter().map(Vec::len).product();
    'assignments: for code in 0..total {
        let mut rest = code;
        let mut chosen = Vec::with_capacity(candidates.len());
        for c in &candidates {
            chosen.push(c[rest % c.len()]);
            rest /= c.len();
        }
        let mut uses: HashMap<&str, u32> = HashMap::new();
        for inst in &chosen {
            let n = uses.entry(inst.id.as_str()).or_default();
            *n += 1;
            if *n > inst.spare() {
                continue 'assignments;
            }
        }
        any_capacity_ok = true;

        let mut nodes = vec![origin.clone()];
        nodes.extend(chosen.iter().map(|i| region_node(i)));
        nodes.push(destination.clone());
        let mut hops = Vec::with_capacity(nodes.len() - 1);
        for pair in nodes.windows(2) {
            match router.hop(&pair[0], &pair[1]) {
                Ok(h) => hops.push(h),
                Err(e) => {
                    last_route_err = Some(e);
                    continue 'assignments;
                }
            }
        }
        let total_rtt: f64 = hops.iter().map(Hop::rtt_ms).sum();
        let ids: Vec<String> = chosen.iter().map(|i| i.id.clone()).collect();
        let better = match &best {
            None => true,
            Some((cur_rtt, cur_ids, _)) => total_rtt < *cur_rtt || (total_rtt == *cur_rtt && ids < *cur_ids),
        };
        if better {
            best = Some((total_rtt, ids, hops));
        }
    }

    match best {
        Some((_, ids, hops)) => finish(registry, w, ids, hops),
        None if !any_capacity_ok => Err(capacity_failure(w, &candidates)),
        None => Err(ScheduleError::Route(last_route_err.expect("an assignment failed routing"))),
    }
}

/// First step at which the workflow demands more units of its service type
/// than the registry has spare.
fn capacity_failure(w: &Workflow, candidates: &[Vec<&ServiceInstance>]) -> ScheduleError {
    let mut demand: HashMap<&str, u32> = HashMap::new();
    for (step, (s, c)) in w.steps.iter().zip(candidates).enumerate() {
        let need = demand.entry(s.as_str()).or_default();
        *need += 1;
        let spare: u32 = c.iter().map(|i| i.spare()).sum();
        if *need > spare {
            return ScheduleError::CapacityExhausted { step, service_type: s.clone() };
        }
    }
    ScheduleError::CapacityExhausted { step: 0, service_type: w.steps[0].clone() }
}
