//! Ping-result ingestion and region-level RTT aggregation.
//!
//! The accepted document is the subset of the RIPE Atlas v2 ping result
//! schema that matters here: a top-level array of objects carrying
//! `prb_id`, `timestamp`, `dst_addr` and a `result` array of per-packet
//! `{ "rtt": <ms> }` entries. Lost packets appear in Atlas output as
//! `{ "x": "*" }` (or carry an `error` field) and are skipped. Unknown
//! fields are ignored. An optional top-level `hop_count` extension is read
//! when present.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Link, RttOverride};

/// Region assigned to records whose probe is absent from the probe map.
pub const UNMAPPED_REGION: &str = "unmapped";

/// Credits per measurement that reproduce a 6.8M-credit, 388,872-measurement
/// campaign.
pub const DEFAULT_COST_PER_MEASUREMENT: f64 = 17.487;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("malformed measurement document at byte {offset}: {message}")]
    Malformed { offset: usize, message: String },
    #[error("malformed probe map at byte {offset}: {message}")]
    MalformedProbeMap { offset: usize, message: String },
    #[error("no measurement records to aggregate")]
    EmptyInput,
    #[error("campaign needs at least one probe")]
    NoProbes,
    #[error("campaign interval must be positive and no longer than the duration (interval {interval_s}s, duration {duration_s}s)")]
    BadSchedule { interval_s: u64, duration_s: u64 },
    #[error("insufficient credits: need {requested}, have {balance}")]
    InsufficientCredits { requested: u64, balance: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub probe_id: u64,
    pub src_region: String,
    pub dst_region: String,
    pub timestamp: i64,
    pub rtts_ms: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hop_count: Option<u32>,
}

/// Maps probe ids (and optionally destination addresses) to region ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProbeMap {
    probes: HashMap<u64, String>,
    addresses: HashMap<String, String>,
}

#[derive(Deserialize)]
struct ProbeMapEntry {
    #[serde(default)]
    prb_id: Option<u64>,
    #[serde(default)]
    dst_addr: Option<String>,
    region: String,
}

impl ProbeMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses a probe-map document: an array of `{prb_id, region}` objects.
    /// Entries of the form `{dst_addr, region}` map destination addresses.
    pub fn from_json(raw: &[u8]) -> Result<Self, MeasureError> {
        let entries: Vec<ProbeMapEntry> = serde_json::from_slice(raw).map_err(|e| MeasureError::MalformedProbeMap {
            offset: byte_offset(raw, &e),
            message: e.to_string(),
        })?;
        let mut map = ProbeMap::new();
        for (i, e) in entries.into_iter().enumerate() {
            match (e.prb_id, e.dst_addr) {
                (Some(id), _) => map.insert_probe(id, e.region),
                (None, Some(addr)) => map.insert_address(addr, e.region),
                (None, None) => {
                    return Err(MeasureError::MalformedProbeMap {
                        offset: 0,
                        message: format!("entry {i} has neither prb_id nor dst_addr"),
                    })
                }
            }
        }
        Ok(map)
    }

    pub fn insert_probe(&mut self, probe_id: u64, region: impl Into<String>) {
        self.probes.insert(probe_id, region.into());
    }

    pub fn insert_address(&mut self, addr: impl Into<String>, region: impl Into<String>) {
        self.addresses.insert(addr.into(), region.into());
    }

    pub fn region_of_probe(&self, probe_id: u64) -> Option<&str> {
        self.probes.get(&probe_id).map(String::as_str)
    }

    /// Destination region for an address; unmapped addresses stand for
    /// themselves.
    pub fn region_of_address<'a>(&'a self, addr: &'a str) -> &'a str {
        self.addresses.get(addr).map(String::as_str).unwrap_or(addr)
    }
}

#[derive(Deserialize)]
struct RawResult {
    prb_id: u64,
    timestamp: i64,
    dst_addr: String,
    #[serde(default)]
    result: Vec<RawPacket>,
    #[serde(default)]
    hop_count: Option<u32>,
}

#[derive(Deserialize)]
struct RawPacket {
    #[serde(default)]
    rtt: Option<f64>,
}

#[derive(Serialize)]
struct OutResult<'a> {
    prb_id: u64,
    timestamp: i64,
    dst_addr: &'a str,
    result: Vec<OutPacket>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hop_count: Option<u32>,
}

#[derive(Serialize)]
struct OutPacket {
    rtt: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParseOutcome {
    pub records: Vec<MeasurementRecord>,
    /// Result objects dropped because no packet carried an RTT.
    pub skipped: usize,
    /// Probe ids that had no entry in the probe map.
    pub unmapped_probes: BTreeSet<u64>,
}

fn byte_offset(raw: &[u8], err: &serde_json::Error) -> usize {
    let (line, column) = (err.line(), err.column());
    if line == 0 {
        return 0;
    }
    let mut offset = 0;
    for (i, l) in raw.split(|&b| b == b'\n').enumerate() {
        if i + 1 == line {
            return (offset + column.saturating_sub(1)).min(raw.len());
        }
        offset += l.len() + 1;
    }
    raw.len()
}

/// Parses a ping-result document into measurement records.
pub fn parse_ping_results(raw: &[u8], probes: &ProbeMap) -> Result<ParseOutcome, MeasureError> {
    let results: Vec<RawResult> = serde_json::from_slice(raw).map_err(|e| MeasureError::Malformed {
        offset: byte_offset(raw, &e),
        message: e.to_string(),
    })?;

    let mut out = ParseOutcome::default();
    for r in results {
        let rtts: Vec<f64> = r
            .result
            .iter()
            .filter_map(|p| p.rtt)
            .filter(|rtt| rtt.is_finite() && *rtt >= 0.0)
            .collect();
        if rtts.is_empty() {
            out.skipped += 1;
            continue;
        }
        let src_region = match probes.region_of_probe(r.prb_id) {
            Some(region) => region.to_string(),
            None => {
                out.unmapped_probes.insert(r.prb_id);
                UNMAPPED_REGION.to_string()
            }
        };
        out.records.push(MeasurementRecord {
            probe_id: r.prb_id,
            src_region,
            dst_region: probes.region_of_address(&r.dst_addr).to_string(),
            timestamp: r.timestamp,
            rtts_ms: rtts,
            hop_count: r.hop_count.filter(|&h| h > 0),
        });
    }
    Ok(out)
}

/// Serializes records into the parser's input format, writing each
/// record's destination region as its `dst_addr`.
pub fn serialize_ping_results(records: &[MeasurementRecord]) -> Vec<u8> {
    let out: Vec<OutResult<'_>> = records
        .iter()
        .map(|r| OutResult {
            prb_id: r.probe_id,
            timestamp: r.timestamp,
            dst_addr: &r.dst_region,
            result: r.rtts_ms.iter().map(|&rtt| OutPacket { rtt }).collect(),
            hop_count: r.hop_count,
        })
        .collect();
    serde_json::to_vec(&out).expect("records serialize")
}

/// Keeps records with `since <= timestamp <= until`. `None` leaves that
/// side of the window open.
pub fn filter_window(records: Vec<MeasurementRecord>, since: Option<i64>, until: Option<i64>) -> Vec<MeasurementRecord> {
    records
        .into_iter()
        .filter(|r| since.is_none_or(|s| r.timestamp >= s) && until.is_none_or(|u| r.timestamp <= u))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RttStats {
    pub min_ms: f64,
    pub avg_ms: f64,
    pub max_ms: f64,
    /// Population standard deviation.
    pub stddev_ms: f64,
    pub sample_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_hops: Option<f64>,
}

impl RttStats {
    /// Statistics of a nonempty pool of samples.
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let n = samples.len() as f64;
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for &s in samples {
            min = min.min(s);
            max = max.max(s);
            sum += s;
        }
        // Rounding can push the mean a hair outside [min, max] on
        // near-constant pools.
        let avg = (sum / n).clamp(min, max);
        let var = samples.iter().map(|s| (s - avg) * (s - avg)).sum::<f64>() / n;
        Some(Self {
            min_ms: min,
            avg_ms: avg,
            max_ms: max,
            stddev_ms: var.sqrt(),
            sample_count: samples.len() as u64,
            mean_hops: None,
        })
    }
}

/// Region-pair RTT statistics at a point in time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LatencyMatrix {
    pub snapshot_time: i64,
    pub entries: BTreeMap<(String, String), RttStats>,
}

#[derive(Serialize, Deserialize)]
struct MatrixEntryRepr {
    src_region: String,
    dst_region: String,
    #[serde(flatten)]
    stats: RttStats,
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    snapshot_time: i64,
    entries: Vec<MatrixEntryRepr>,
}

impl Serialize for LatencyMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        MatrixRepr {
            snapshot_time: self.snapshot_time,
            entries: self
                .entries
                .iter()
                .map(|((s, d), stats)| MatrixEntryRepr {
                    src_region: s.clone(),
                    dst_region: d.clone(),
                    stats: stats.clone(),
                })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LatencyMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = MatrixRepr::deserialize(deserializer)?;
        let mut entries = BTreeMap::new();
        for e in repr.entries {
            if entries.insert((e.src_region.clone(), e.dst_region.clone()), e.stats).is_some() {
                return Err(serde::de::Error::custom(format!(
                    "duplicate matrix entry {} -> {}",
                    e.src_region, e.dst_region
                )));
            }
        }
        Ok(LatencyMatrix { snapshot_time: repr.snapshot_time, entries })
    }
}

impl LatencyMatrix {
    pub fn get(&self, src: &str, dst: &str) -> Option<&RttStats> {
        self.entries.get(&(src.to_string(), dst.to_string()))
    }

    /// Either direction of a pair; RTT is symmetric.
    pub fn get_symmetric(&self, a: &str, b: &str) -> Option<&RttStats> {
        self.get(a, b).or_else(|| self.get(b, a))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("matrix serializes")
    }
}

/// Measured averages replace a link's static RTT when the matrix holds an
/// entry for the ids of the two nodes the link joins.
impl RttOverride for LatencyMatrix {
    fn rtt_for(&self, link: &Link) -> Option<f64> {
        self.get_symmetric(&link.src.id, &link.dst.id).map(|s| s.avg_ms)
    }
}

/// Pools every per-packet RTT for each (src, dst) region pair.
pub fn aggregate_region_rtt(records: &[MeasurementRecord]) -> Result<LatencyMatrix, MeasureError> {
    if records.is_empty() {
        return Err(MeasureError::EmptyInput);
    }
    let mut pools: BTreeMap<(String, String), (Vec<f64>, Vec<u32>)> = BTreeMap::new();
    for r in records {
        let pool = pools.entry((r.src_region.clone(), r.dst_region.clone())).or_default();
        pool.0.extend_from_slice(&r.rtts_ms);
        pool.1.extend(r.hop_count);
    }
    let entries = pools
        .into_iter()
        .filter_map(|(key, (mut rtts, hops))| {
            // Sorting makes the floating-point sums independent of record order.
            rtts.sort_by(f64::total_cmp);
            let mut stats = RttStats::from_samples(&rtts)?;
            if !hops.is_empty() {
                stats.mean_hops = Some(hops.iter().map(|&h| f64::from(h)).sum::<f64>() / hops.len() as f64);
            }
            Some((key, stats))
        })
        .collect();
    let snapshot_time = records.iter().map(|r| r.timestamp).max().unwrap_or_default();
    Ok(LatencyMatrix { snapshot_time, entries })
}

/// Publishes immutable matrix snapshots. Readers never observe a partially
/// built matrix.
#[derive(Debug, Default)]
pub struct MatrixStore {
    current: RwLock<Arc<LatencyMatrix>>,
}

impl MatrixStore {
    pub fn new(initial: LatencyMatrix) -> Self {
        Self { current: RwLock::new(Arc::new(initial)) }
    }

    pub fn snapshot(&self) -> Arc<LatencyMatrix> {
        self.current.read().expect("matrix lock poisoned").clone()
    }

    pub fn publish(&self, next: LatencyMatrix) {
        *self.current.write().expect("matrix lock poisoned") = Arc::new(next);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreditLedger {
    balance: u64,
    pub cost_per_measurement: f64,
}

impl CreditLedger {
    pub fn new(balance: u64, cost_per_measurement: f64) -> Self {
        assert!(cost_per_measurement > 0.0, "cost per measurement must be positive");
        Self { balance, cost_per_measurement }
    }

    pub fn balance(&self) -> u64 {
        self.balance
    }

    /// Deducts `amount`; on error the balance is untouched.
    pub fn spend(&mut self, amount: u64) -> Result<u64, MeasureError> {
        match self.balance.checked_sub(amount) {
            Some(rest) => {
                self.balance = rest;
                Ok(rest)
            }
            None => Err(MeasureError::InsufficientCredits { requested: amount, balance: self.balance }),
        }
    }

    pub fn plan_campaign(&self, probe_count: u64, interval_s: u64, duration_s: u64) -> Result<CampaignPlan, MeasureError> {
        plan_campaign(self, probe_count, interval_s, duration_s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CampaignPlan {
    pub measurement_count: u64,
    pub total_cost: f64,
    pub feasible: bool,
}

pub fn plan_campaign(
    ledger: &CreditLedger,
    probe_count: u64,
    interval_s: u64,
    duration_s: u64,
) -> Result<CampaignPlan, MeasureError> {
    if probe_count == 0 {
        return Err(MeasureError::NoProbes);
    }
    if interval_s == 0 || interval_s > duration_s {
        return Err(MeasureError::BadSchedule { interval_s, duration_s });
    }
    let measurement_count = probe_count * (duration_s / interval_s);
    let total_cost = measurement_count as f64 * ledger.cost_per_measurement;
    Ok(CampaignPlan { measurement_count, total_cost, feasible: total_cost <= ledger.balance as f64 })
}
