//! Seeded generators for random topologies, policies and workloads.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{CloudRegion, Endpoint, Link, LinkKind, NodeRef, Topology};
use crate::pathfinder::{Objective, TransferPolicy};
use crate::scheduler::{Registry, ServiceInstance, Workflow};

#[derive(Debug, Clone, Copy)]
pub struct TopologyParams {
    pub regions: usize,
    pub endpoints: usize,
    /// Probability that a given region pair has an overlay link.
    pub overlay_density: f64,
    /// Probability that an endpoint also gets a direct-connect link.
    pub direct_connect_prob: f64,
    /// Probability of a second, parallel overlay link between a connected pair.
    pub parallel_prob: f64,
}

impl Default for TopologyParams {
    fn default() -> Self {
        Self { regions: 5, endpoints: 3, overlay_density: 0.6, direct_connect_prob: 0.3, parallel_prob: 0.1 }
    }
}

fn link(id: String, src: NodeRef, dst: NodeRef, kind: LinkKind, rng: &mut ChaCha8Rng) -> Link {
    Link {
        id,
        src,
        dst,
        kind,
        capacity_mbps: rng.random_range(1..=200u32) as f64 * 10.0,
        base_rtt_ms: rng.random_range(1..=1500u32) as f64 / 10.0,
        jitter_stddev_ms: rng.random_range(0..=50u32) as f64 / 10.0,
        loss_prob: if rng.random_bool(0.5) { 0.0 } else { rng.random_range(1..=200u32) as f64 / 10000.0 },
    }
}

/// Builds a valid topology with regions `r0..`, endpoints `e0..` and links
/// `l0..`. Every endpoint has at least one ISP access link.
pub fn random_topology(seed: u64, params: TopologyParams) -> Topology {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nr = params.regions.max(1);
    let ne = params.endpoints.max(2);
    let regions: Vec<CloudRegion> =
        (0..nr).map(|i| CloudRegion { id: format!("r{i}"), name: format!("Region {i}"), display_index: Some(i as u32 + 1) }).collect();
    let endpoints: Vec<Endpoint> = (0..ne)
        .map(|i| Endpoint { id: format!("e{i}"), label: format!("Site {i}"), region_hint: None, has_probe: rng.random_bool(0.5) })
        .collect();

    let mut links = Vec::new();

    for i in 0..ne {
        let e = NodeRef::endpoint(format!("e{i}"));
        let access = rng.random_range(1..=nr.min(2));
        let mut picked: Vec<usize> = (0..nr).collect();
        shuffle(&mut picked, &mut rng);
        for &r in picked.iter().take(access) {
            let id = format!("l{}", links.len());
            links.push(link(id, e.clone(), NodeRef::region(format!("r{r}")), LinkKind::IspInternet, &mut rng));
        }
        if rng.random_bool(params.direct_connect_prob) {
            let r = rng.random_range(0..nr);
            let id = format!("l{}", links.len());
            links.push(link(id, e.clone(), NodeRef::region(format!("r{r}")), LinkKind::DirectConnect, &mut rng));
        }
    }
    for i in 0..ne {
        for j in i + 1..ne {
            if rng.random_bool(0.5) {
                let id = format!("l{}", links.len());
                links.push(link(
                    id,
                    NodeRef::endpoint(format!("e{i}")),
                    NodeRef::endpoint(format!("e{j}")),
                    LinkKind::IspInternet,
                    &mut rng,
                ));
            }
        }
    }
    for i in 0..nr {
        for j in i + 1..nr {
            if rng.random_bool(params.overlay_density) {
                let copies = if rng.random_bool(params.parallel_prob) { 2 } else { 1 };
                for _ in 0..copies {
                    let id = format!("l{}", links.len());
                    let (a, b) = if rng.random_bool(0.5) { (i, j) } else { (j, i) };
                    links.push(link(
                        id,
                        NodeRef::region(format!("r{a}")),
                        NodeRef::region(format!("r{b}")),
                        LinkKind::CloudOverlay,
                        &mut rng,
                    ));
                }
            }
        }
    }
    Topology { regions, endpoints, links }
}

fn shuffle<T>(v: &mut [T], rng: &mut ChaCha8Rng) {
    use rand::seq::SliceRandom;
    v.shuffle(rng);
}

pub fn random_policy(seed: u64) -> TransferPolicy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let objective = *Objective::ALL.choose(&mut rng).expect("objectives");
    TransferPolicy {
        objective,
        max_relay_regions: rng.random_range(0..=3),
        min_throughput_mbps: rng.random_bool(0.3).then(|| rng.random_range(1..=100u32) as f64 * 10.0),
        max_rtt_ms: rng.random_bool(0.3).then(|| rng.random_range(10..=400u32) as f64),
    }
}

/// Registers `per_type` instances of each service type in random regions.
pub fn random_registry(seed: u64, t: &Topology, service_types: &[&str], per_type: usize) -> Registry {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reg = Registry::new();
    for st in service_types {
        for k in 0..per_type {
            let region = t.regions.choose(&mut rng).expect("topology has regions").id.clone();
            reg.register_service(ServiceInstance {
                id: format!("{st}-{k}"),
                service_type: st.to_string(),
                region,
                capacity_units: rng.random_range(1..=3),
                load_units: 0,
            })
            .expect("generated instance is valid");
        }
    }
    reg
}

/// A workflow over `steps` service types drawn from `service_types`, from
/// and to random endpoints.
pub fn random_workflow(seed: u64, t: &Topology, service_types: &[&str], steps: usize) -> Workflow {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let origin = t.endpoints.choose(&mut rng).expect("topology has endpoints").id.clone();
    let destination = t.endpoints.choose(&mut rng).expect("topology has endpoints").id.clone();
    Workflow {
        id: format!("wf-{seed}"),
        steps: (0..steps).map(|_| service_types.choose(&mut rng).expect("service types").to_string()).collect(),
        origin,
        destination,
        max_total_rtt_ms: None,
        allow_loopback: false,
    }
}
