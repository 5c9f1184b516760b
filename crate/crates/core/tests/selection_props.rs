use proptest::prelude::*;
use sdi_core::model::{CloudRegion, Endpoint, Link, LinkKind, NodeRef, StaticRtt, Topology};
use sdi_core::pathfinder::oracle::brute_force_best;
use sdi_core::pathfinder::{enumerate_paths, plan_route, select_path, Objective, RouteError, Scenario, TransferPolicy};
use sdi_core::synth::{random_policy, random_topology, TopologyParams};

fn topology(seed: u64, regions: usize) -> Topology {
    random_topology(seed, TopologyParams { regions, ..TopologyParams::default() })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn enumerator_agrees_with_brute_force(seed in any::<u64>(), regions in 1usize..=8) {
        let t = topology(seed, regions);
        let base = random_policy(seed ^ 0x5eed);
        for objective in Objective::ALL {
            let policy = TransferPolicy { objective, ..base };
            let fast = enumerate_paths(&t, "e0", "e1", &policy, &StaticRtt).and_then(|p| select_path(&p, &policy));
            let slow = brute_force_best(&t, "e0", "e1", &policy, &StaticRtt);
            match (fast, slow) {
                (Ok(a), Ok(b)) => {
                    prop_assert_eq!(&a.path, &b.path);
                    prop_assert_eq!(a.metrics, b.metrics);
                    prop_assert_eq!(a.scenario, b.scenario);
                }
                (Err(a), Err(b)) => prop_assert_eq!(a, b),
                (a, b) => prop_assert!(false, "enumerator {:?} vs oracle {:?}", a, b),
            }
        }
    }

    #[test]
    fn scaling_capacities_keeps_the_throughput_choice(seed in any::<u64>(), regions in 1usize..=6, k in 1u32..=16) {
        let t = topology(seed, regions);
        let policy = TransferPolicy::with_objective(Objective::MaxThroughput);
        let mut scaled = t.clone();
        for l in &mut scaled.links {
            l.capacity_mbps *= f64::from(k);
        }
        let a = plan_route(&t, "e0", "e1", &policy);
        let b = plan_route(&scaled, "e0", "e1", &policy);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.path, b.path);
                prop_assert_eq!(a.metrics.bottleneck_mbps * f64::from(k), b.metrics.bottleneck_mbps);
            }
            (Err(a), Err(b)) => prop_assert_eq!(a, b),
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
        }
    }

    #[test]
    fn extra_overlay_never_hurts(
        seed in any::<u64>(),
        regions in 2usize..=6,
        ends in (0usize..6, 0usize..6),
        cap in 1u32..=300,
        rtt in 1u32..=1500,
        jitter in 0u32..=50,
    ) {
        let t = topology(seed, regions);
        let (i, j) = (ends.0 % regions, ends.1 % regions);
        prop_assume!(i != j);
        let mut richer = t.clone();
        richer.links.push(Link {
            id: "extra".into(),
            src: NodeRef::region(format!("r{i}")),
            dst: NodeRef::region(format!("r{j}")),
            kind: LinkKind::CloudOverlay,
            capacity_mbps: f64::from(cap) * 10.0,
            base_rtt_ms: f64::from(rtt) / 10.0,
            jitter_stddev_ms: f64::from(jitter) / 10.0,
            loss_prob: 0.0,
        });
        let base = random_policy(seed.rotate_left(7));
        for objective in Objective::ALL {
            let policy = TransferPolicy { objective, ..base };
            if let Ok(before) = plan_route(&t, "e0", "e1", &policy) {
                let after = plan_route(&richer, "e0", "e1", &policy);
                prop_assert!(after.is_ok());
                let after = after.unwrap();
                let (old, new) = (objective.value(&before.metrics), objective.value(&after.metrics));
                if objective == Objective::MaxThroughput {
                    prop_assert!(new >= old);
                } else {
                    prop_assert!(new <= old);
                }
            }
        }
    }
}

fn two_access_kinds(isp_jitter: f64, dc_jitter: f64, cap: f64, rtt: f64, far: (f64, f64, f64)) -> Topology {
    let link = |id: &str, src: NodeRef, dst: NodeRef, kind, capacity_mbps, base_rtt_ms, jitter_stddev_ms| Link {
        id: id.into(),
        src,
        dst,
        kind,
        capacity_mbps,
        base_rtt_ms,
        jitter_stddev_ms,
        loss_prob: 0.0,
    };
    Topology {
        regions: ["near", "far"].iter().map(|id| CloudRegion { id: id.to_string(), name: String::new(), display_index: None }).collect(),
        endpoints: ["origin", "server"]
            .iter()
            .map(|id| Endpoint { id: id.to_string(), label: String::new(), region_hint: None, has_probe: false })
            .collect(),
        links: vec![
            link("access-dc", NodeRef::endpoint("origin"), NodeRef::region("near"), LinkKind::DirectConnect, cap, rtt, dc_jitter),
            link("access-isp", NodeRef::endpoint("origin"), NodeRef::region("near"), LinkKind::IspInternet, cap, rtt, isp_jitter),
            link("backbone", NodeRef::region("near"), NodeRef::region("far"), LinkKind::CloudOverlay, far.0, far.1, far.2),
            link("tail", NodeRef::region("far"), NodeRef::endpoint("server"), LinkKind::IspInternet, far.0, 1.0, 0.1),
        ],
    }
}

proptest! {
    #[test]
    fn min_jitter_prefers_the_dedicated_access(
        dc_jitter in 0.0..5.0f64,
        gap in 0.01..5.0f64,
        cap in 10.0..1000.0f64,
        rtt in 1.0..50.0f64,
        far in (100.0..2000.0f64, 10.0..200.0f64, 0.0..3.0f64),
    ) {
        let t = two_access_kinds(dc_jitter + gap, dc_jitter, cap, rtt, far);
        let plan = plan_route(&t, "origin", "server", &TransferPolicy::with_objective(Objective::MinJitter)).unwrap();
        prop_assert_eq!(plan.scenario, Scenario::SdiDirectConnect);
        prop_assert_eq!(&plan.path.segments[0], "access-dc");
    }
}

#[test]
fn disconnected_pair_is_infeasible_for_both() {
    let mut t = two_access_kinds(2.0, 1.0, 100.0, 5.0, (1000.0, 100.0, 0.5));
    t.links.retain(|l| l.id != "backbone");
    let policy = TransferPolicy::default();
    assert!(matches!(plan_route(&t, "origin", "server", &policy), Err(RouteError::NoFeasiblePath(_))));
    assert!(matches!(brute_force_best(&t, "origin", "server", &policy, &StaticRtt), Err(RouteError::NoFeasiblePath(_))));
}
