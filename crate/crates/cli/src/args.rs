use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand};
use sdi_core::netsim::NoiseModel;
use sdi_core::pathfinder::{Objective, Scenario};

#[derive(Debug, Parser)]
#[command(name = "sdi", version, about = "Plan, schedule and simulate transfers over ISP and cloud-overlay paths")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a region latency matrix from ping results.
    Ingest(IngestArgs),
    /// Check a topology file and list every violation.
    Validate(ValidateArgs),
    /// Choose a path between two endpoints.
    Plan(PlanArgs),
    /// Place a workflow's steps onto registered service instances.
    Schedule(ScheduleArgs),
    /// Replay the chosen path under random jitter and loss.
    Simulate(SimulateArgs),
    /// Simulate the best plan of every realizable scenario.
    Compare(CompareArgs),
    /// Throughput to many destinations over ISP and overlay paths.
    Sweep(SweepArgs),
    /// Cost a measurement campaign against a credit balance.
    Campaign(CampaignArgs),
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["atlas_file", "measurement_id"])))]
pub struct IngestArgs {
    /// Ping results saved from the Atlas API.
    #[arg(long)]
    pub atlas_file: Option<PathBuf>,
    /// Fetch results for this measurement from the Atlas API.
    #[arg(long)]
    pub measurement_id: Option<u64>,
    /// Probe id to region table.
    #[arg(long)]
    pub probe_map: Option<PathBuf>,
    /// Where to write the latency matrix.
    #[arg(long)]
    pub out: PathBuf,
    /// Atlas endpoint settings (JSON).
    #[arg(long)]
    pub atlas_config: Option<PathBuf>,
    /// Overrides the configured API base URL.
    #[arg(long)]
    pub base_url: Option<String>,
    /// Drop records older than this unix timestamp.
    #[arg(long)]
    pub since: Option<i64>,
    /// Drop records newer than this unix timestamp.
    #[arg(long)]
    pub until: Option<i64>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub topology: PathBuf,
}

#[derive(Debug, Args)]
pub struct RouteInputs {
    #[arg(long)]
    pub topology: PathBuf,
    /// Latency matrix whose averages replace static link RTTs.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PolicyArgs {
    /// Transfer policy file (JSON); the flags below override it.
    #[arg(long)]
    pub policy: Option<PathBuf>,
    #[arg(long)]
    pub objective: Option<Objective>,
    #[arg(long)]
    pub max_relays: Option<usize>,
    #[arg(long)]
    pub min_throughput: Option<f64>,
    #[arg(long)]
    pub max_rtt: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = sdi_core::netsim::DEFAULT_SAMPLE_COUNT)]
    pub samples: usize,
    /// gaussian_truncated or uniform.
    #[arg(long, default_value = "gaussian_truncated")]
    pub noise: NoiseModel,
    /// Seconds between probes.
    #[arg(long, default_value_t = 1.0)]
    pub interval_s: f64,
    /// Time-of-day jitter windows (JSON array of {start_s, multiplier}).
    #[arg(long)]
    pub jitter_schedule: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub inputs: RouteInputs,
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[arg(long = "from")]
    pub src: String,
    #[arg(long = "to")]
    pub dst: String,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    #[command(flatten)]
    pub inputs: RouteInputs,
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[arg(long)]
    pub registry: PathBuf,
    #[arg(long)]
    pub workflow: PathBuf,
    /// Write the updated loads back to the registry file.
    #[arg(long)]
    pub commit: bool,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub inputs: RouteInputs,
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long = "from")]
    pub src: String,
    #[arg(long = "to")]
    pub dst: String,
    /// Restrict the plan to one scenario.
    #[arg(long)]
    pub scenario: Option<Scenario>,
    /// Per-sample RTT series.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub summary_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub inputs: RouteInputs,
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long = "from")]
    pub src: String,
    #[arg(long = "to")]
    pub dst: String,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub summary_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub inputs: RouteInputs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long = "from")]
    pub src: String,
    /// Destination endpoints; defaults to every endpoint placed in a region.
    #[arg(long = "to", value_delimiter = ',')]
    pub dst: Vec<String>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CampaignArgs {
    #[arg(long)]
    pub probes: u64,
    #[arg(long, default_value_t = 3600)]
    pub interval_s: u64,
    #[arg(long)]
    pub days: u64,
    #[arg(long)]
    pub balance: u64,
    #[arg(long, default_value_t = sdi_core::measure::DEFAULT_COST_PER_MEASUREMENT)]
    pub cost: f64,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}
