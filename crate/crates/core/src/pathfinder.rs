//! Candidate-path enumeration and policy-driven path selection.
//!
//! A candidate path from `from` to `to` is either a direct ISP link between
//! two endpoints, or a relay chain `from -> r_1 -> ... -> r_k -> to` through
//! distinct cloud regions. Access segments (endpoint to region) may be ISP or
//! direct-connect links; region-to-region segments are cloud-overlay links.
//! Parallel links yield one candidate each.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    compose_metrics, Link, LinkKind, NodeKind, NodeRef, Path, PathMetrics, RttOverride, SegmentProfile, StaticRtt,
    Topology,
};

/// Largest relay bound the enumerator accepts.
pub const MAX_RELAY_BOUND: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    MinLatency,
    MaxThroughput,
    MinJitter,
    MinLoss,
}

impl Objective {
    pub const ALL: [Objective; 4] =
        [Objective::MinLatency, Objective::MaxThroughput, Objective::MinJitter, Objective::MinLoss];

    pub fn as_str(self) -> &'static str {
        match self {
            Objective::MinLatency => "min_latency",
            Objective::MaxThroughput => "max_throughput",
            Objective::MinJitter => "min_jitter",
            Objective::MinLoss => "min_loss",
        }
    }

    /// Value the objective optimizes.
    pub fn value(self, m: &PathMetrics) -> f64 {
        match self {
            Objective::MinLatency => m.rtt_ms,
            Objective::MaxThroughput => m.bottleneck_mbps,
            Objective::MinJitter => m.jitter_ms,
            Objective::MinLoss => m.loss_prob,
        }
    }

    /// `Less` when `a` is strictly better than `b`.
    pub fn compare(self, a: &PathMetrics, b: &PathMetrics) -> Ordering {
        let ord = self.value(a).total_cmp(&self.value(b));
        match self {
            Objective::MaxThroughput => ord.reverse(),
            _ => ord,
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Objective::ALL
            .into_iter()
            .find(|o| o.as_str() == s)
            .ok_or_else(|| format!("unknown objective `{s}`"))
    }
}

fn default_relays() -> usize {
    2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferPolicy {
    pub objective: Objective,
    #[serde(default = "default_relays")]
    pub max_relay_regions: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_throughput_mbps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rtt_ms: Option<f64>,
}

impl Default for TransferPolicy {
    fn default() -> Self {
        Self { objective: Objective::MinLatency, max_relay_regions: default_relays(), min_throughput_mbps: None, max_rtt_ms: None }
    }
}

impl TransferPolicy {
    pub fn with_objective(objective: Objective) -> Self {
        Self { objective, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), RouteError> {
        if self.max_relay_regions > MAX_RELAY_BOUND {
            return Err(RouteError::InvalidPolicy(format!(
                "max_relay_regions {} exceeds {MAX_RELAY_BOUND}",
                self.max_relay_regions
            )));
        }
        for (name, v) in [("min_throughput_mbps", self.min_throughput_mbps), ("max_rtt_ms", self.max_rtt_ms)] {
            if let Some(v) = v {
                if v.is_nan() || v < 0.0 {
                    return Err(RouteError::InvalidPolicy(format!("{name} must be nonnegative")));
                }
            }
        }
        Ok(())
    }

    /// `true` when `m` satisfies both optional constraints.
    pub fn admits(&self, m: &PathMetrics) -> bool {
        self.min_throughput_mbps.is_none_or(|min| m.bottleneck_mbps >= min)
            && self.max_rtt_ms.is_none_or(|max| m.rtt_ms <= max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    IspOnly,
    SdiViaIsp,
    SdiDirectConnect,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::IspOnly, Scenario::SdiViaIsp, Scenario::SdiDirectConnect];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::IspOnly => "isp_only",
            Scenario::SdiViaIsp => "sdi_via_isp",
            Scenario::SdiDirectConnect => "sdi_direct_connect",
        }
    }

    /// Scenario implied by a path's segment kinds.
    pub fn classify(from: &NodeRef, to: &NodeRef, kinds: &[LinkKind]) -> Scenario {
        if kinds == [LinkKind::IspInternet] && from.is_endpoint() && to.is_endpoint() {
            Scenario::IspOnly
        } else if from.is_endpoint() && kinds.first() == Some(&LinkKind::DirectConnect) {
            Scenario::SdiDirectConnect
        } else {
            Scenario::SdiViaIsp
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|o| o.as_str() == s)
            .ok_or_else(|| format!("unknown scenario `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutePlan {
    pub from: NodeRef,
    pub to: NodeRef,
    pub path: Path,
    pub metrics: PathMetrics,
    pub scenario: Scenario,
    /// Resolved per-segment attributes, in path order.
    pub profiles: Vec<SegmentProfile>,
}

impl RoutePlan {
    fn from_profiles(from: NodeRef, to: NodeRef, profiles: Vec<SegmentProfile>) -> Self {
        let kinds: Vec<LinkKind> = profiles.iter().map(|p| p.kind).collect();
        let scenario = Scenario::classify(&from, &to, &kinds);
        Self {
            path: Path::new(profiles.iter().map(|p| p.link_id.clone())),
            metrics: compose_metrics(&profiles),
            scenario,
            from,
            to,
            profiles,
        }
    }

    pub fn segment_count(&self) -> usize {
        self.path.len()
    }
}

/// Why no plan survived selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Infeasibility {
    NoCandidates,
    MinThroughput(f64),
    MaxRtt(f64),
}

impl fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Infeasibility::NoCandidates => f.write_str("no candidate paths"),
            Infeasibility::MinThroughput(v) => write!(f, "min_throughput_mbps {v} not met by any path"),
            Infeasibility::MaxRtt(v) => write!(f, "max_rtt_ms {v} not met by any path"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RouteError {
    #[error("unknown endpoint `{0}`")]
    UnknownEndpoint(String),
    #[error("unknown node {0}")]
    UnknownNode(NodeRef),
    #[error("source and destination are the same node {0}")]
    SameNode(NodeRef),
    #[error("endpoint `{0}` has no access link to any region")]
    NoRegionAccess(String),
    #[error("no feasible path: {0}")]
    NoFeasiblePath(Infeasibility),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("exhaustive search supports at most {limit} regions, topology has {found}")]
    TooManyRegions { limit: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessCriterion {
    MaxAccessRate,
    MinAccessRtt,
}

/// The region an endpoint reaches best over a single access link.
pub fn nearest_region<'a>(
    t: &'a Topology,
    endpoint_id: &str,
    criterion: AccessCriterion,
) -> Result<&'a crate::model::CloudRegion, RouteError> {
    let node = NodeRef::endpoint(endpoint_id);
    if t.endpoint(endpoint_id).is_none() {
        return Err(RouteError::UnknownEndpoint(endpoint_id.to_string()));
    }
    let mut best: Option<(&Link, &NodeRef)> = None;
    for link in t.links_at(&node) {
        if link.kind == LinkKind::CloudOverlay {
            continue;
        }
        let Some(region) = link.opposite(&node).filter(|n| n.is_region()) else { continue };
        let better = match best {
            None => true,
            Some((cur, cur_region)) => {
                let ord = match criterion {
                    AccessCriterion::MaxAccessRate => cur.capacity_mbps.total_cmp(&link.capacity_mbps),
                    AccessCriterion::MinAccessRtt => link.base_rtt_ms.total_cmp(&cur.base_rtt_ms),
                };
                ord == Ordering::Less || (ord == Ordering::Equal && region.id < cur_region.id)
            }
        };
        if better {
            best = Some((link, region));
        }
    }
    let (_, region) = best.ok_or_else(|| RouteError::NoRegionAccess(endpoint_id.to_string()))?;
    t.region(&region.id).ok_or_else(|| RouteError::UnknownNode(region.clone()))
}

/// Whether `link` may carry a hop between nodes of these kinds.
fn admissible(link: &Link, a: &NodeRef, b: &NodeRef) -> bool {
    match (a.kind, b.kind) {
        (NodeKind::Endpoint, NodeKind::Endpoint) => link.kind == LinkKind::IspInternet,
        (NodeKind::Region, NodeKind::Region) => link.kind == LinkKind::CloudOverlay,
        _ => link.kind != LinkKind::CloudOverlay,
    }
}

fn check_nodes(t: &Topology, from: &NodeRef, to: &NodeRef) -> Result<(), RouteError> {
    for n in [from, to] {
        if !t.contains_node(n) {
            return Err(match n.kind {
                NodeKind::Endpoint => RouteError::UnknownEndpoint(n.id.clone()),
                NodeKind::Region => RouteError::UnknownNode(n.clone()),
            });
        }
    }
    if from == to {
        return Err(RouteError::SameNode(from.clone()));
    }
    Ok(())
}

/// Orders plans by scenario, then by segment ids.
fn canonical_order(a: &RoutePlan, b: &RoutePlan) -> Ordering {
    a.scenario.cmp(&b.scenario).then_with(|| a.path.segments.cmp(&b.path.segments))
}

struct Walker<'a> {
    adjacency: HashMap<&'a NodeRef, Vec<&'a Link>>,
    to: &'a NodeRef,
    max_relays: usize,
    rtts: &'a dyn RttOverride,
    visited: HashSet<&'a NodeRef>,
    stack: Vec<&'a Link>,
    found: Vec<Vec<&'a Link>>,
}

impl<'a> Walker<'a> {
    fn visit(&mut self, at: &'a NodeRef, relays: usize) {
        let Some(links) = self.adjacency.get(at).cloned() else { return };
        for link in links {
            let next = link.opposite(at).expect("adjacent link touches node");
            if !admissible(link, at, next) {
                continue;
            }
            if next == self.to {
                self.stack.push(link);
                self.found.push(self.stack.clone());
                self.stack.pop();
            } else if next.is_region() && relays < self.max_relays && !self.visited.contains(next) {
                self.visited.insert(next);
                self.stack.push(link);
                self.visit(next, relays + 1);
                self.stack.pop();
                self.visited.remove(next);
            }
        }
    }

    fn profile(&self, link: &Link) -> SegmentProfile {
        let mut p = link.profile();
        if let Some(rtt) = self.rtts.rtt_for(link) {
            p.base_rtt_ms = rtt;
        }
        p
    }
}

/// All candidate routes between two nodes, in canonical order.
pub fn enumerate_routes(
    t: &Topology,
    from: &NodeRef,
    to: &NodeRef,
    policy: &TransferPolicy,
    rtts: &dyn RttOverride,
) -> Result<Vec<RoutePlan>, RouteError> {
    policy.validate()?;
    check_nodes(t, from, to)?;

    let mut adjacency: HashMap<&NodeRef, Vec<&Link>> = HashMap::new();
    for link in &t.links {
        adjacency.entry(&link.src).or_default().push(link);
        if link.dst != link.src {
            adjacency.entry(&link.dst).or_default().push(link);
        }
    }
    let mut walker = Walker {
        adjacency,
        to,
        max_relays: policy.max_relay_regions,
        rtts,
        visited: HashSet::from([from]),
        stack: Vec::new(),
        found: Vec::new(),
    };
    walker.visit(from, 0);

    let found = std::mem::take(&mut walker.found);
    let mut plans: Vec<RoutePlan> = found
        .into_iter()
        .map(|links| {
            let profiles = links.iter().map(|l| walker.profile(l)).collect();
            RoutePlan::from_profiles(from.clone(), to.clone(), profiles)
        })
        .collect();
    plans.sort_by(canonical_order);
    Ok(plans)
}

/// Candidate routes between two endpoints.
pub fn enumerate_paths(
    t: &Topology,
    src: &str,
    dst: &str,
    policy: &TransferPolicy,
    rtts: &dyn RttOverride,
) -> Result<Vec<RoutePlan>, RouteError> {
    enumerate_routes(t, &NodeRef::endpoint(src), &NodeRef::endpoint(dst), policy, rtts)
}

/// The plan that best serves `policy`. Ties go to fewer segments, then to
/// the lexicographically smaller segment-id list.
pub fn select_path(plans: &[RoutePlan], policy: &TransferPolicy) -> Result<RoutePlan, RouteError> {
    if plans.is_empty() {
        return Err(RouteError::NoFeasiblePath(Infeasibility::NoCandidates));
    }
    let fast: Vec<&RoutePlan> = plans
        .iter()
        .filter(|p| policy.min_throughput_mbps.is_none_or(|min| p.metrics.bottleneck_mbps >= min))
        .collect();
    if fast.is_empty() {
        return Err(RouteError::NoFeasiblePath(Infeasibility::MinThroughput(policy.min_throughput_mbps.unwrap())));
    }
    let feasible = fast.into_iter().filter(|p| policy.max_rtt_ms.is_none_or(|max| p.metrics.rtt_ms <= max));
    let mut best: Option<&RoutePlan> = None;
    for plan in feasible {
        best = match best {
            None => Some(plan),
            Some(cur) => {
                let ord = policy
                    .objective
                    .compare(&plan.metrics, &cur.metrics)
                    .then(plan.segment_count().cmp(&cur.segment_count()))
                    .then_with(|| plan.path.segments.cmp(&cur.path.segments));
                Some(if ord == Ordering::Less { plan } else { cur })
            }
        };
    }
    best.cloned().ok_or_else(|| RouteError::NoFeasiblePath(Infeasibility::MaxRtt(policy.max_rtt_ms.unwrap())))
}

/// Best route between two nodes, optionally restricted to one scenario.
pub fn best_route(
    t: &Topology,
    from: &NodeRef,
    to: &NodeRef,
    policy: &TransferPolicy,
    scenario: Option<Scenario>,
    rtts: &dyn RttOverride,
) -> Result<RoutePlan, RouteError> {
    let mut plans = enumerate_routes(t, from, to, policy, rtts)?;
    if let Some(s) = scenario {
        plans.retain(|p| p.scenario == s);
    }
    select_path(&plans, policy)
}

/// Best route between two endpoints using static link values.
pub fn plan_route(t: &Topology, src: &str, dst: &str, policy: &TransferPolicy) -> Result<RoutePlan, RouteError> {
    best_route(t, &NodeRef::endpoint(src), &NodeRef::endpoint(dst), policy, None, &StaticRtt)
}

/// Exhaustive reference search used to check the enumerator.
pub mod oracle {
    use super::*;
    use crate::model::{path_metrics_with, segment_profiles, trace_from};

    /// Region count above which exhaustive search is refused.
    pub const REGION_LIMIT: usize = 8;

    fn orderings<'a>(pool: &[&'a NodeRef], max_len: usize) -> Vec<Vec<&'a NodeRef>> {
        let mut out = vec![Vec::new()];
        let mut frontier: Vec<Vec<&NodeRef>> = vec![Vec::new()];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for seq in &frontier {
                for r in pool {
                    if !seq.contains(r) {
                        let mut s = seq.clone();
                        s.push(*r);
                        next.push(s);
                    }
                }
            }
            out.extend(next.iter().cloned());
            frontier = next;
        }
        out
    }

    fn link_choices<'a>(t: &'a Topology, a: &NodeRef, b: &NodeRef) -> Vec<&'a Link> {
        t.links
            .iter()
            .filter(|l| l.joins(a, b))
            .filter(|l| match (a.is_region(), b.is_region()) {
                (false, false) => l.kind == LinkKind::IspInternet,
                (true, true) => l.kind == LinkKind::CloudOverlay,
                _ => matches!(l.kind, LinkKind::IspInternet | LinkKind::DirectConnect),
            })
            .collect()
    }

    /// Every simple path within the relay bound, by brute force over region
    /// sequences and parallel-link choices.
    pub fn all_routes(
        t: &Topology,
        from: &NodeRef,
        to: &NodeRef,
        policy: &TransferPolicy,
        rtts: &dyn RttOverride,
    ) -> Result<Vec<RoutePlan>, RouteError> {
        policy.validate()?;
        check_nodes(t, from, to)?;
        if t.regions.len() > REGION_LIMIT {
            return Err(RouteError::TooManyRegions { limit: REGION_LIMIT, found: t.regions.len() });
        }
        let region_nodes: Vec<NodeRef> = t.regions.iter().map(|r| NodeRef::region(&r.id)).collect();
        let pool: Vec<&NodeRef> = region_nodes.iter().filter(|r| *r != from && *r != to).collect();

        let mut out = Vec::new();
        for relays in orderings(&pool, policy.max_relay_regions) {
            let mut nodes = vec![from];
            nodes.extend(relays);
            nodes.push(to);
            let mut paths: Vec<Vec<String>> = vec![Vec::new()];
            for pair in nodes.windows(2) {
                let choices = link_choices(t, pair[0], pair[1]);
                paths = paths
                    .iter()
                    .flat_map(|prefix| {
                        choices.iter().map(move |l| {
                            let mut p = prefix.clone();
                            p.push(l.id.clone());
                            p
                        })
                    })
                    .collect();
            }
            for segments in paths {
                let path = Path { segments };
                if trace_from(t, &path, from).is_err() {
                    continue;
                }
                let metrics = path_metrics_with(t, &path, rtts).expect("traced path has metrics");
                let profiles = segment_profiles(t, &path, rtts).expect("traced path has profiles");
                let kinds: Vec<LinkKind> = path.segments.iter().map(|id| t.link(id).unwrap().kind).collect();
                out.push(RoutePlan {
                    from: from.clone(),
                    to: to.clone(),
                    scenario: Scenario::classify(from, to, &kinds),
                    path,
                    metrics,
                    profiles,
                });
            }
        }
        Ok(out)
    }

    /// Best plan by exhaustive search, with the same tie-break rules as
    /// [`select_path`].
    pub fn brute_force_best(
        t: &Topology,
        src: &str,
        dst: &str,
        policy: &TransferPolicy,
        rtts: &dyn RttOverride,
    ) -> Result<RoutePlan, RouteError> {
        brute_force_route(t, &NodeRef::endpoint(src), &NodeRef::endpoint(dst), policy, None, rtts)
    }

    pub fn brute_force_route(
        t: &Topology,
        from: &NodeRef,
        to: &NodeRef,
        policy: &TransferPolicy,
        scenario: Option<Scenario>,
        rtts: &dyn RttOverride,
    ) -> Result<RoutePlan, RouteError> {
        let mut plans = all_routes(t, from, to, policy, rtts)?;
        if let Some(s) = scenario {
            plans.retain(|p| p.scenario == s);
        }
        if plans.is_empty() {
            return Err(RouteError::NoFeasiblePath(Infeasibility::NoCandidates));
        }
        if let Some(min) = policy.min_throughput_mbps {
            plans.retain(|p| p.metrics.bottleneck_mbps >= min);
            if plans.is_empty() {
                return Err(RouteError::NoFeasiblePath(Infeasibility::MinThroughput(min)));
            }
        }
        if let Some(max) = policy.max_rtt_ms {
            plans.retain(|p| p.metrics.rtt_ms <= max);
            if plans.is_empty() {
                return Err(RouteError::NoFeasiblePath(Infeasibility::MaxRtt(max)));
            }
        }
        let sign = if policy.objective == Objective::MaxThroughput { -1.0 } else { 1.0 };
        plans.sort_by(|a, b| {
            (sign * policy.objective.value(&a.metrics))
                .total_cmp(&(sign * policy.objective.value(&b.metrics)))
                .then(a.path.len().cmp(&b.path.len()))
                .then_with(|| a.path.segments.cmp(&b.path.segments))
        });
        Ok(plans.swap_remove(0))
    }
}
