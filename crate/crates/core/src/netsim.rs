//! Seeded replay of route plans under per-segment RTT noise and loss.
//!
//! Each probe packet walks the plan's segments. Every segment draws one
//! uniform for its loss trial and one noise sample for its RTT, whether or
//! not the packet survives, so the random stream consumed never depends on
//! loss probabilities. Throughput is a capacity model: the plan bottleneck
//! scaled by the delivery rate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{NodeRef, RttOverride, Topology};
use crate::pathfinder::{best_route, Objective, RouteError, RoutePlan, Scenario, TransferPolicy};

/// Five hours at one probe per second.
pub const DEFAULT_SAMPLE_COUNT: usize = 18_000;

const SECONDS_PER_DAY: f64 = 86_400.0;
const MAX_REDRAWS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    GaussianTruncated,
    Uniform,
}

impl std::str::FromStr for NoiseModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gaussian_truncated" | "gaussian" => Ok(NoiseModel::GaussianTruncated),
            "uniform" => Ok(NoiseModel::Uniform),
            other => Err(format!("unknown noise model `{other}`")),
        }
    }
}

/// Jitter multiplier in effect from `start_s` (seconds after midnight)
/// until the next window starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterWindow {
    pub start_s: f64,
    pub multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub sample_count: usize,
    pub probe_interval_s: f64,
    pub noise_model: NoiseModel,
    /// Time-of-day jitter schedule; empty means a constant multiplier of 1.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub jitter_schedule: Vec<JitterWindow>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            sample_count: DEFAULT_SAMPLE_COUNT,
            probe_interval_s: 1.0,
            noise_model: NoiseModel::GaussianTruncated,
            jitter_schedule: Vec::new(),
        }
    }
}

impl SimConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    fn sorted_schedule(&self) -> Vec<JitterWindow> {
        let mut windows = self.jitter_schedule.clone();
        windows.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
        windows
    }

    #[cfg(test)]
    fn jitter_multiplier(&self, sample: usize) -> f64 {
        multiplier_at(&self.sorted_schedule(), sample as f64 * self.probe_interval_s)
    }
}

/// Multiplier in effect at `elapsed_s` for a schedule sorted by start time.
fn multiplier_at(windows: &[JitterWindow], elapsed_s: f64) -> f64 {
    let t = elapsed_s.rem_euclid(SECONDS_PER_DAY);
    // Before the first window the schedule wraps round from the last one.
    windows
        .iter()
        .rev()
        .find(|w| w.start_s <= t)
        .or(windows.last())
        .map_or(1.0, |w| w.multiplier)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub scenario: String,
    /// One entry per probe; `None` marks a lost packet.
    pub rtt_series_ms: Vec<Option<f64>>,
    pub delivered: usize,
    pub lost: usize,
    /// `None` when nothing was delivered.
    pub mean_rtt_ms: Option<f64>,
    /// Population standard deviation of delivered RTTs.
    pub jitter_ms: f64,
    pub loss_rate: f64,
    pub bottleneck_mbps: f64,
    pub achieved_throughput_mbps: f64,
}

impl SimReport {
    pub fn sample_count(&self) -> usize {
        self.rtt_series_ms.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("no scenario is realizable between `{src}` and `{dst}`")]
    NoScenario { src: String, dst: String },
    #[error(transparent)]
    Route(#[from] RouteError),
}

fn noise(rng: &mut ChaCha8Rng, model: NoiseModel, base: f64, stddev: f64) -> f64 {
    if stddev == 0.0 {
        return 0.0;
    }
    for _ in 0..MAX_REDRAWS {
        let n = match model {
            NoiseModel::GaussianTruncated => stddev * rng.sample::<f64, _>(StandardNormal),
            NoiseModel::Uniform => {
                // Same standard deviation as the gaussian.
                let half_width = stddev * 3f64.sqrt();
                half_width * (2.0 * rng.random::<f64>() - 1.0)
            }
        };
        if base + n >= 0.0 {
            return n;
        }
    }
    -base
}

/// Replays `plan` on random stream `stream` of `cfg.seed`.
pub fn simulate_on_stream(plan: &RoutePlan, cfg: &SimConfig, stream: u64, label: &str) -> SimReport {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);

    let schedule = cfg.sorted_schedule();
    let mut series = Vec::with_capacity(cfg.sample_count);
    for i in 0..cfg.sample_count {
        let mult = multiplier_at(&schedule, i as f64 * cfg.probe_interval_s);
        let mut lost = false;
        let mut rtt = 0.0;
        for seg in &plan.profiles {
            let u: f64 = rng.random();
            lost |= u < seg.loss_prob;
            rtt += seg.base_rtt_ms + noise(&mut rng, cfg.noise_model, seg.base_rtt_ms, seg.jitter_stddev_ms * mult);
        }
        series.push(if lost { None } else { Some(rtt) });
    }

    let delivered: Vec<f64> = series.iter().flatten().copied().collect();
    let lost = series.len() - delivered.len();
    let (mean, jitter) = if delivered.is_empty() {
        (None, 0.0)
    } else {
        // Shifted by the first sample so a constant series has exactly zero spread.
        let n = delivered.len() as f64;
        let x0 = delivered[0];
        let shift = delivered.iter().map(|r| r - x0).sum::<f64>() / n;
        let var = delivered.iter().map(|r| (r - x0 - shift) * (r - x0 - shift)).sum::<f64>() / n;
        (Some(x0 + shift), var.sqrt())
    };
    let loss_rate = if series.is_empty() { 0.0 } else { lost as f64 / series.len() as f64 };
    let bottleneck = plan.metrics.bottleneck_mbps;
    SimReport {
        scenario: label.to_string(),
        delivered: delivered.len(),
        lost,
        rtt_series_ms: series,
        mean_rtt_ms: mean,
        jitter_ms: jitter,
        loss_rate,
        bottleneck_mbps: bottleneck,
        achieved_throughput_mbps: bottleneck * (1.0 - loss_rate),
    }
}

pub fn simulate_transfer(plan: &RoutePlan, cfg: &SimConfig) -> SimReport {
    simulate_on_stream(plan, cfg, 0, plan.scenario.as_str())
}

/// Stream id reserved for a scenario, distinct from the default stream 0.
fn scenario_stream(s: Scenario) -> u64 {
    match s {
        Scenario::IspOnly => 1,
        Scenario::SdiViaIsp => 2,
        Scenario::SdiDirectConnect => 3,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub plan: RoutePlan,
    pub report: SimReport,
}

/// Best plan for every realizable scenario, in scenario order.
pub fn scenario_plans(
    t: &Topology,
    src: &str,
    dst: &str,
    policy: &TransferPolicy,
    rtts: &dyn RttOverride,
) -> Result<Vec<RoutePlan>, SimError> {
    let from = NodeRef::endpoint(src);
    let to = NodeRef::endpoint(dst);
    let mut plans = Vec::new();
    for s in Scenario::ALL {
        match best_route(t, &from, &to, policy, Some(s), rtts) {
            Ok(plan) => plans.push(plan),
            Err(RouteError::NoFeasiblePath(_)) => {}
            Err(e) => return Err(e.into()),
        }
    }
    if plans.is_empty() {
        return Err(SimError::NoScenario { src: src.to_string(), dst: dst.to_string() });
    }
    Ok(plans)
}

/// Simulates the best plan of each realizable scenario on its own random
/// substream of `cfg.seed`.
pub fn compare_scenarios(
    t: &Topology,
    src: &str,
    dst: &str,
    policy: &TransferPolicy,
    cfg: &SimConfig,
    rtts: &(dyn RttOverride + Sync),
) -> Result<Vec<ScenarioRun>, SimError> {
    let plans = scenario_plans(t, src, dst, policy, rtts)?;
    Ok(plans
        .into_par_iter()
        .map(|plan| {
            let report = simulate_on_stream(&plan, cfg, scenario_stream(plan.scenario), plan.scenario.as_str());
            ScenarioRun { plan, report }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub destination: String,
    /// Region the destination server sits in, from its `region_hint`.
    pub region: Option<String>,
    pub display_index: Option<u32>,
    pub isp_mbps: Option<f64>,
    pub sdi_mbps: Option<f64>,
}

impl SweepRow {
    pub fn reachable(&self) -> bool {
        self.isp_mbps.is_some() || self.sdi_mbps.is_some()
    }
}

/// Achieved throughput from `src` to each destination endpoint over the
/// direct ISP path and over the ISP-connected overlay.
pub fn throughput_sweep(
    t: &Topology,
    src: &str,
    destinations: &[String],
    cfg: &SimConfig,
    rtts: &(dyn RttOverride + Sync),
) -> Result<Vec<SweepRow>, SimError> {
    let policy = TransferPolicy::with_objective(Objective::MaxThroughput);
    let from = NodeRef::endpoint(src);
    if t.endpoint(src).is_none() {
        return Err(RouteError::UnknownEndpoint(src.to_string()).into());
    }
    destinations
        .par_iter()
        .enumerate()
        .map(|(row, dst)| {
            let to = NodeRef::endpoint(dst);
            let endpoint = t.endpoint(dst).ok_or_else(|| RouteError::UnknownEndpoint(dst.clone()))?;
            let region = endpoint.region_hint.clone();
            let display_index = region.as_deref().and_then(|r| t.region(r)).and_then(|r| r.display_index);
            let rate = |scenario: Scenario, stream: u64| -> Result<Option<f64>, SimError> {
                match best_route(t, &from, &to, &policy, Some(scenario), rtts) {
                    Ok(plan) => Ok(Some(simulate_on_stream(&plan, cfg, stream, scenario.as_str()).achieved_throughput_mbps)),
                    Err(RouteError::NoFeasiblePath(_)) => Ok(None),
                    Err(e) => Err(e.into()),
                }
            };
            let base = 2 * row as u64 + 16;
            Ok(SweepRow {
                destination: dst.clone(),
                region,
                display_index,
                isp_mbps: rate(Scenario::IspOnly, base)?,
                sdi_mbps: rate(Scenario::SdiViaIsp, base + 1)?,
            })
        })
        .collect()
}
