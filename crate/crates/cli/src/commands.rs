use std::path::Path;

use sdi_core::atlasio::{self, AtlasEndpointConfig, AtlasError};
use sdi_core::measure::{
    aggregate_region_rtt, filter_window, parse_ping_results, CreditLedger, LatencyMatrix, MeasureError, ProbeMap,
};
use sdi_core::model::{validate_topology, NodeRef, RttOverride, StaticRtt, Topology};
use sdi_core::netsim::{self, JitterWindow, ScenarioRun, SimConfig, SimError, SimReport};
use sdi_core::pathfinder::{best_route, enumerate_paths, select_path, RouteError, RoutePlan, TransferPolicy};
use sdi_core::scheduler::{schedule_workflow, Placement, Registry, ScheduleError, Workflow};

use crate::args::*;
use crate::report::{ensure_parent, num, opt, table, Run};
use crate::status::Failure;

fn read(path: &Path, run: &mut Run) -> Result<Vec<u8>, Failure> {
    run.input(path);
    std::fs::read(path).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path, run: &mut Run) -> Result<T, Failure> {
    let raw = read(path, run)?;
    serde_json::from_slice(&raw).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

fn load_topology(path: &Path, run: &mut Run) -> Result<Topology, Failure> {
    let t: Topology = parse_json(path, run)?;
    let violations = validate_topology(&t);
    if violations.is_empty() {
        return Ok(t);
    }
    let mut msg = format!("{} is invalid:", path.display());
    for v in violations {
        msg.push_str(&format!("\n  {v}"));
    }
    Err(Failure::invalid(msg))
}

enum Rtts {
    Static(StaticRtt),
    Matrix(LatencyMatrix),
}

impl Rtts {
    fn get(&self) -> &(dyn RttOverride + Sync) {
        match self {
            Rtts::Static(s) => s,
            Rtts::Matrix(m) => m,
        }
    }
}

fn load_inputs(inputs: &RouteInputs, run: &mut Run) -> Result<(Topology, Rtts), Failure> {
    let t = load_topology(&inputs.topology, run)?;
    let rtts = match &inputs.matrix {
        Some(path) => Rtts::Matrix(parse_json(path, run)?),
        None => Rtts::Static(StaticRtt),
    };
    Ok((t, rtts))
}

fn load_policy(args: &PolicyArgs, run: &mut Run) -> Result<TransferPolicy, Failure> {
    let mut policy = match &args.policy {
        Some(path) => parse_json(path, run)?,
        None => TransferPolicy::default(),
    };
    if let Some(o) = args.objective {
        policy.objective = o;
    }
    if let Some(n) = args.max_relays {
        policy.max_relay_regions = n;
    }
    if args.min_throughput.is_some() {
        policy.min_throughput_mbps = args.min_throughput;
    }
    if args.max_rtt.is_some() {
        policy.max_rtt_ms = args.max_rtt;
    }
    policy.validate().map_err(route_failure)?;
    Ok(policy)
}

fn sim_config(args: &SimArgs, run: &mut Run) -> Result<SimConfig, Failure> {
    if args.samples == 0 {
        return Err(Failure::usage("--samples must be at least 1"));
    }
    if args.interval_s.is_nan() || args.interval_s <= 0.0 {
        return Err(Failure::usage("--interval-s must be positive"));
    }
    let jitter_schedule: Vec<JitterWindow> = match &args.jitter_schedule {
        Some(path) => parse_json(path, run)?,
        None => Vec::new(),
    };
    if jitter_schedule.iter().any(|w| w.multiplier.is_nan() || w.multiplier < 0.0 || !w.start_s.is_finite()) {
        return Err(Failure::invalid("jitter schedule multipliers must be nonnegative"));
    }
    run.seed(args.seed);
    Ok(SimConfig {
        seed: args.seed,
        sample_count: args.samples,
        probe_interval_s: args.interval_s,
        noise_model: args.noise,
        jitter_schedule,
    })
}

fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, Failure> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        if n == 0 {
            return Err(Failure::usage("--jobs must be at least 1"));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Failure::invalid(e.to_string()))
}

fn route_failure(e: RouteError) -> Failure {
    match e {
        RouteError::NoFeasiblePath(_) | RouteError::NoRegionAccess(_) => Failure::infeasible(e.to_string()),
        _ => Failure::invalid(e.to_string()),
    }
}

fn sim_failure(e: SimError) -> Failure {
    match e {
        SimError::NoScenario { .. } => Failure::infeasible(e.to_string()),
        SimError::Route(r) => route_failure(r),
    }
}

fn schedule_failure(e: ScheduleError) -> Failure {
    match e {
        ScheduleError::CapacityExhausted { .. } | ScheduleError::SloViolation { .. } => Failure::infeasible(e.to_string()),
        ScheduleError::Route(r) => route_failure(r),
        _ => Failure::invalid(e.to_string()),
    }
}

fn atlas_failure(e: AtlasError) -> Failure {
    match e {
        AtlasError::Config(_) | AtlasError::NotFound(_) | AtlasError::Io(_) => Failure::invalid(e.to_string()),
        AtlasError::UnknownMeasurement(_) | AtlasError::RateLimited | AtlasError::Http { .. } | AtlasError::Transport { .. } => {
            Failure::transport(e.to_string())
        }
    }
}

fn measure_failure(e: MeasureError) -> Failure {
    Failure::invalid(e.to_string())
}

fn node(n: &NodeRef) -> String {
    n.to_string()
}

pub fn ingest(a: &IngestArgs) -> Result<(), Failure> {
    let mut run = Run::start("ingest");
    let raw = match (&a.atlas_file, a.measurement_id) {
        (Some(path), None) => {
            run.input(path);
            atlasio::load_results_file(path).map_err(atlas_failure)?
        }
        (None, Some(id)) => {
            let mut cfg = match &a.atlas_config {
                Some(path) => {
                    let raw = read(path, &mut run)?;
                    AtlasEndpointConfig::from_json(&String::from_utf8_lossy(&raw)).map_err(atlas_failure)?
                }
                None => AtlasEndpointConfig::default(),
            };
            if let Some(url) = &a.base_url {
                cfg.base_url = url.clone();
            }
            atlasio::fetch_results(&cfg.with_env_key(), id).map_err(atlas_failure)?
        }
        _ => return Err(Failure::usage("pass exactly one of --atlas-file and --measurement-id")),
    };

    let probes = match &a.probe_map {
        Some(path) if path.exists() => {
            let raw = read(path, &mut run)?;
            ProbeMap::from_json(&raw).map_err(measure_failure)?
        }
        Some(path) => {
            eprintln!("warning: probe map {} not found; every probe is treated as unmapped", path.display());
            ProbeMap::new()
        }
        None => {
            eprintln!("warning: no probe map given; every probe is treated as unmapped");
            ProbeMap::new()
        }
    };
    let outcome = parse_ping_results(&raw, &probes).map_err(measure_failure)?;
    if !outcome.unmapped_probes.is_empty() && a.probe_map.is_some() {
        eprintln!("warning: {} probe(s) missing from the probe map", outcome.unmapped_probes.len());
    }
    let records = filter_window(outcome.records, a.since, a.until);
    let matrix = aggregate_region_rtt(&records).map_err(measure_failure)?;
    ensure_parent(&a.out)?;
    std::fs::write(&a.out, matrix.to_json_pretty() + "\n").map_err(|e| Failure::invalid(format!("{}: {e}", a.out.display())))?;

    let rows: Vec<Vec<String>> = matrix
        .entries
        .iter()
        .map(|((s, d), st)| vec![s.clone(), d.clone(), num(st.avg_ms), num(st.stddev_ms), st.sample_count.to_string()])
        .collect();
    print!("{}", table(&["src_region", "dst_region", "avg_ms", "stddev_ms", "samples"], &rows));
    println!("{} record(s), {} skipped, matrix written to {}", records.len(), outcome.skipped, a.out.display());
    Ok(())
}

pub fn validate(a: &ValidateArgs) -> Result<(), Failure> {
    let mut run = Run::start("validate");
    let t = load_topology(&a.topology, &mut run)?;
    println!(
        "{} is valid: {} region(s), {} endpoint(s), {} link(s)",
        a.topology.display(),
        t.regions.len(),
        t.endpoints.len(),
        t.links.len()
    );
    Ok(())
}

fn plan_row(selected: bool, p: &RoutePlan) -> Vec<String> {
    vec![
        if selected { "*".into() } else { String::new() },
        p.scenario.as_str().into(),
        p.path.to_string(),
        num(p.metrics.bottleneck_mbps),
        num(p.metrics.rtt_ms),
        num(p.metrics.jitter_ms),
        num(p.metrics.loss_prob),
    ]
}

const PLAN_HEADER: [&str; 7] = ["selected", "scenario", "segments", "bottleneck_mbps", "rtt_ms", "jitter_ms", "loss_prob"];

pub fn plan(a: &PlanArgs) -> Result<(), Failure> {
    let mut run = Run::start("plan");
    let (t, rtts) = load_inputs(&a.inputs, &mut run)?;
    let policy = load_policy(&a.policy, &mut run)?;
    let candidates = enumerate_paths(&t, &a.src, &a.dst, &policy, rtts.get()).map_err(route_failure)?;
    let chosen = select_path(&candidates, &policy);
    let rows: Vec<Vec<String>> = candidates
        .iter()
        .map(|p| plan_row(chosen.as_ref().is_ok_and(|c| c.path == p.path), p))
        .collect();
    print!("{}", table(&PLAN_HEADER, &rows));
    if let Some(path) = &a.csv {
        run.write_csv(path, &PLAN_HEADER, &rows)?;
    }
    let chosen = chosen.map_err(route_failure)?;
    println!(
        "selected {} via {} ({} objective)",
        chosen.scenario.as_str(),
        chosen.path,
        policy.objective.as_str()
    );
    Ok(())
}

const SCHEDULE_HEADER: [&str; 8] = ["hop", "from", "to", "instance", "service_type", "scenario", "segments", "rtt_ms"];

fn placement_rows(p: &Placement, reg: &Registry) -> Vec<Vec<String>> {
    p.hops
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let inst = p.assignments.get(i).and_then(|id| reg.get(id));
            vec![
                i.to_string(),
                node(&h.from),
                node(&h.to),
                inst.map(|x| x.id.clone()).unwrap_or_default(),
                inst.map(|x| x.service_type.clone()).unwrap_or_default(),
                h.route.as_ref().map_or("co_located".into(), |r| r.scenario.as_str().to_string()),
                h.route.as_ref().map(|r| r.path.to_string()).unwrap_or_default(),
                num(h.rtt_ms()),
            ]
        })
        .collect()
}

pub fn schedule(a: &ScheduleArgs) -> Result<(), Failure> {
    let mut run = Run::start("schedule");
    let (t, rtts) = load_inputs(&a.inputs, &mut run)?;
    let policy = load_policy(&a.policy, &mut run)?;
    let raw = read(&a.registry, &mut run)?;
    let mut reg = Registry::from_json(&String::from_utf8_lossy(&raw)).map_err(|e| Failure::invalid(format!("{}: {e}", a.registry.display())))?;
    for inst in reg.instances() {
        if t.region(&inst.region).is_none() {
            return Err(Failure::invalid(format!("instance `{}` names unknown region `{}`", inst.id, inst.region)));
        }
    }
    let w: Workflow = parse_json(&a.workflow, &mut run)?;

    let placement = match schedule_workflow(&mut reg, &t, rtts.get(), &w, &policy) {
        Ok(p) => p,
        Err(ScheduleError::SloViolation { achieved_rtt_ms, limit_ms, placement }) => {
            print!("{}", table(&SCHEDULE_HEADER, &placement_rows(&placement, &reg)));
            return Err(Failure::infeasible(format!(
                "best greedy placement needs {achieved_rtt_ms} ms, above the {limit_ms} ms limit; nothing was reserved"
            )));
        }
        Err(e) => return Err(schedule_failure(e)),
    };
    let rows = placement_rows(&placement, &reg);
    print!("{}", table(&SCHEDULE_HEADER, &rows));
    println!("workflow {} placed on {}: total RTT {} ms", w.id, placement.assignments.join(", "), num(placement.total_rtt_ms));
    if let Some(path) = &a.csv {
        run.write_csv(path, &SCHEDULE_HEADER, &rows)?;
    }
    if a.commit {
        std::fs::write(&a.registry, reg.to_json_pretty() + "\n")
            .map_err(|e| Failure::invalid(format!("{}: {e}", a.registry.display())))?;
        println!("registry {} updated", a.registry.display());
    }
    Ok(())
}

const SERIES_HEADER: [&str; 3] = ["scenario", "sample_index", "rtt_ms_or_LOST"];
const SUMMARY_HEADER: [&str; 5] = ["scenario", "mean_rtt_ms", "jitter_ms", "loss_rate", "throughput_mbps"];

fn series_rows(reports: &[&SimReport]) -> Vec<Vec<String>> {
    reports
        .iter()
        .flat_map(|r| {
            r.rtt_series_ms.iter().enumerate().map(move |(i, x)| {
                vec![r.scenario.clone(), i.to_string(), x.map_or_else(|| "LOST".to_string(), num)]
            })
        })
        .collect()
}

fn summary_rows(reports: &[&SimReport]) -> Vec<Vec<String>> {
    reports
        .iter()
        .map(|r| vec![r.scenario.clone(), opt(r.mean_rtt_ms), num(r.jitter_ms), num(r.loss_rate), num(r.achieved_throughput_mbps)])
        .collect()
}

fn write_sim_outputs(run: &Run, reports: &[&SimReport], csv: &Option<std::path::PathBuf>, summary: &Option<std::path::PathBuf>) -> Result<(), Failure> {
    let rows = summary_rows(reports);
    print!("{}", table(&SUMMARY_HEADER, &rows));
    if let Some(path) = csv {
        run.write_csv(path, &SERIES_HEADER, &series_rows(reports))?;
    }
    if let Some(path) = summary {
        run.write_csv(path, &SUMMARY_HEADER, &rows)?;
    }
    Ok(())
}

pub fn simulate(a: &SimulateArgs) -> Result<(), Failure> {
    let mut run = Run::start("simulate");
    let (t, rtts) = load_inputs(&a.inputs, &mut run)?;
    let policy = load_policy(&a.policy, &mut run)?;
    let cfg = sim_config(&a.sim, &mut run)?;
    let plan = best_route(&t, &NodeRef::endpoint(&a.src), &NodeRef::endpoint(&a.dst), &policy, a.scenario, rtts.get())
        .map_err(route_failure)?;
    println!("plan: {} via {}", plan.scenario.as_str(), plan.path);
    let report = netsim::simulate_transfer(&plan, &cfg);
    write_sim_outputs(&run, &[&report], &a.csv, &a.summary_csv)
}

pub fn compare(a: &CompareArgs) -> Result<(), Failure> {
    let mut run = Run::start("compare");
    let (t, rtts) = load_inputs(&a.inputs, &mut run)?;
    let policy = load_policy(&a.policy, &mut run)?;
    let cfg = sim_config(&a.sim, &mut run)?;
    let pool = thread_pool(a.jobs)?;
    let runs: Vec<ScenarioRun> = pool
        .install(|| netsim::compare_scenarios(&t, &a.src, &a.dst, &policy, &cfg, rtts.get()))
        .map_err(sim_failure)?;
    for r in &runs {
        println!("{}: {}", r.plan.scenario.as_str(), r.plan.path);
    }
    let reports: Vec<&SimReport> = runs.iter().map(|r| &r.report).collect();
    write_sim_outputs(&run, &reports, &a.csv, &a.summary_csv)
}

const SWEEP_HEADER: [&str; 6] = ["region", "display_index", "destination", "isp_mbps", "sdi_mbps", "status"];

pub fn sweep(a: &SweepArgs) -> Result<(), Failure> {
    let mut run = Run::start("sweep");
    let (t, rtts) = load_inputs(&a.inputs, &mut run)?;
    let cfg = sim_config(&a.sim, &mut run)?;
    let destinations: Vec<String> = if a.dst.is_empty() {
        t.endpoints.iter().filter(|e| e.id != a.src && e.region_hint.is_some()).map(|e| e.id.clone()).collect()
    } else {
        a.dst.clone()
    };
    let pool = thread_pool(a.jobs)?;
    let rows = pool
        .install(|| netsim::throughput_sweep(&t, &a.src, &destinations, &cfg, rtts.get()))
        .map_err(sim_failure)?;
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let status = match (r.isp_mbps, r.sdi_mbps) {
                (Some(_), Some(_)) => "ok",
                (None, None) => "unreachable",
                (None, Some(_)) => "isp_unreachable",
                (Some(_), None) => "sdi_unreachable",
            };
            vec![
                r.region.clone().unwrap_or_default(),
                r.display_index.map(|i| i.to_string()).unwrap_or_default(),
                r.destination.clone(),
                opt(r.isp_mbps),
                opt(r.sdi_mbps),
                status.to_string(),
            ]
        })
        .collect();
    print!("{}", table(&SWEEP_HEADER, &rows));
    if let Some(path) = &a.csv {
        run.write_csv(path, &SWEEP_HEADER, &rows)?;
    }
    Ok(())
}

const CAMPAIGN_HEADER: [&str; 6] = ["probes", "interval_s", "days", "measurements", "total_cost", "feasible"];

pub fn campaign(a: &CampaignArgs) -> Result<(), Failure> {
    let run = Run::start("campaign");
    if a.cost.is_nan() || a.cost <= 0.0 {
        return Err(Failure::usage("--cost must be positive"));
    }
    let ledger = CreditLedger::new(a.balance, a.cost);
    let plan = ledger.plan_campaign(a.probes, a.interval_s, a.days * 86_400).map_err(measure_failure)?;
    let rows = vec![vec![
        a.probes.to_string(),
        a.interval_s.to_string(),
        a.days.to_string(),
        plan.measurement_count.to_string(),
        num(plan.total_cost),
        plan.feasible.to_string(),
    ]];
    print!("{}", table(&CAMPAIGN_HEADER, &rows));
    if let Some(path) = &a.csv {
        run.write_csv(path, &CAMPAIGN_HEADER, &rows)?;
    }
    if !plan.feasible {
        return Err(Failure::infeasible(format!("campaign needs {} credits, balance is {}", num(plan.total_cost), a.balance)));
    }
    Ok(())
}
