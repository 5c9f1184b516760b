use std::collections::HashMap;

use proptest::prelude::*;
use sdi_core::model::{StaticRtt, Topology};
use sdi_core::pathfinder::TransferPolicy;
use sdi_core::scheduler::{exhaustive_schedule, release_workflow, schedule_workflow, Placement, Registry, ScheduleError};
use sdi_core::synth::{random_registry, random_topology, random_workflow, TopologyParams};

const TYPES: [&str; 3] = ["cache", "encode", "filter"];

fn world(seed: u64) -> (Topology, Registry) {
    let t = random_topology(seed, TopologyParams { regions: 1 + (seed % 6) as usize, endpoints: 3, overlay_density: 0.5, ..TopologyParams::default() });
    let per_type = 1 + (seed >> 8) as usize % 5;
    let reg = random_registry(seed, &t, &TYPES, per_type);
    (t, reg)
}

fn loads(reg: &Registry) -> HashMap<String, u32> {
    reg.instances().map(|i| (i.id.clone(), i.load_units)).collect()
}

fn capacity_ok(reg: &Registry) -> bool {
    reg.instances().all(|i| i.load_units <= i.capacity_units)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn greedy_is_sound_and_bounded_by_the_oracle(seed in any::<u64>(), steps in 1usize..=4, slo in prop::option::of(50u32..800)) {
        let (t, reg) = world(seed);
        let mut w = random_workflow(seed, &t, &TYPES, steps);
        prop_assume!(w.origin != w.destination);
        w.max_total_rtt_ms = slo.map(f64::from);
        let policy = TransferPolicy { max_relay_regions: 1, ..TransferPolicy::default() };

        let mut greedy_reg = reg.clone();
        let greedy = schedule_workflow(&mut greedy_reg, &t, &StaticRtt, &w, &policy);
        let mut oracle_reg = reg.clone();
        let oracle = exhaustive_schedule(&mut oracle_reg, &t, &StaticRtt, &w, &policy);
        prop_assert!(capacity_ok(&greedy_reg));

        match &greedy {
            Ok(p) => {
                prop_assert_eq!(p.assignments.len(), w.steps.len());
                prop_assert_eq!(p.hops.len(), w.steps.len() + 1);
                let sum: f64 = p.hops.iter().map(|h| h.rtt_ms()).sum();
                prop_assert_eq!(p.total_rtt_ms, sum);
                if let Some(limit) = w.max_total_rtt_ms {
                    prop_assert!(p.total_rtt_ms <= limit);
                }
                for (id, step) in p.assignments.iter().zip(&w.steps) {
                    prop_assert_eq!(&reg.get(id).unwrap().service_type, step);
                }
                let oracle = oracle.as_ref().expect("oracle succeeds whenever greedy does");
                prop_assert!(oracle.total_rtt_ms <= p.total_rtt_ms);
            }
            Err(_) => prop_assert_eq!(loads(&greedy_reg), loads(&reg)),
        }

        // With one candidate per step both searches place identically.
        let mut single = Registry::new();
        for st in &w.steps {
            if single.by_type(st).next().is_none() {
                let mut inst = reg.by_type(st).next().unwrap().clone();
                inst.capacity_units = w.steps.len() as u32;
                single.register_service(inst).unwrap();
            }
        }
        let g = schedule_workflow(&mut single.clone(), &t, &StaticRtt, &w, &policy);
        let o = exhaustive_schedule(&mut single.clone(), &t, &StaticRtt, &w, &policy);
        if let (Ok(g), Ok(o)) = (&g, &o) {
            prop_assert_eq!(g.total_rtt_ms, o.total_rtt_ms);
            prop_assert_eq!(&g.assignments, &o.assignments);
        }
        prop_assert_eq!(g.is_ok(), o.is_ok());
    }

    #[test]
    fn loads_track_active_placements(seed in any::<u64>(), ops in prop::collection::vec((any::<bool>(), 1usize..=4, any::<u64>()), 1..30)) {
        let (t, mut reg) = world(seed);
        let policy = TransferPolicy { max_relay_regions: 1, ..TransferPolicy::default() };
        let mut active: Vec<Placement> = Vec::new();
        for (schedule, steps, s) in ops {
            if schedule || active.is_empty() {
                let w = random_workflow(s, &t, &TYPES, steps);
                if w.origin == w.destination {
                    continue;
                }
                match schedule_workflow(&mut reg, &t, &StaticRtt, &w, &policy) {
                    Ok(p) => active.push(p),
                    Err(ScheduleError::SloViolation { .. }) => prop_assert!(false, "no SLO was set"),
                    Err(_) => {}
                }
            } else {
                let p = active.remove(s as usize % active.len());
                prop_assert!(release_workflow(&mut reg, &p).is_ok());
                prop_assert!(release_workflow(&mut reg, &p).is_err());
            }
            prop_assert!(capacity_ok(&reg));
            let total_load: usize = reg.instances().map(|i| i.load_units as usize).sum();
            let total_steps: usize = active.iter().map(|p| p.assignments.len()).sum();
            prop_assert_eq!(total_load, total_steps);
            prop_assert_eq!(reg.active_placements(), active.len());
        }
        for p in active.drain(..) {
            release_workflow(&mut reg, &p).unwrap();
        }
        prop_assert!(reg.instances().all(|i| i.load_units == 0));
    }
}
