use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sdi_core::atlasio::stub::{StubResponse, StubServer};

fn scenario(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name).to_str().unwrap().to_string()
}

fn sdi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdi")).args(args).env_remove("SDI_ATLAS_KEY").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sdi-cli-{}-{tag}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(code(&sdi(&["--help"])), 0);
    assert_eq!(code(&sdi(&["--version"])), 0);
    assert_eq!(code(&sdi(&["plan", "--help"])), 0);
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(code(&sdi(&[])), 64);
    assert_eq!(code(&sdi(&["frobnicate"])), 64);
    assert_eq!(code(&sdi(&["plan", "--topology", "x"])), 64);
    let both = sdi(&["ingest", "--atlas-file", "a.json", "--measurement-id", "4", "--out", "m.json"]);
    assert_eq!(code(&both), 64);
    assert_eq!(code(&sdi(&["ingest", "--out", "m.json"])), 64);
    assert_eq!(code(&sdi(&["campaign", "--probes", "many", "--days", "1", "--balance", "1"])), 64);
}

#[test]
fn invalid_topology_lists_violations() {
    let dir = scratch("invalid");
    let path = dir.join("bad.topology");
    std::fs::write(
        &path,
        r#"{"regions": [{"id": "r"}], "endpoints": [{"id": "e"}],
            "links": [{"id": "l", "src": {"kind": "endpoint", "id": "e"}, "dst": {"kind": "region", "id": "r"},
                       "kind": "cloud_overlay", "capacity_mbps": 10, "base_rtt_ms": 1, "loss_prob": 1.5}]}"#,
    )
    .unwrap();
    let out = sdi(&["validate", "--topology", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(err.contains("loss_prob out of range"), "{err}");
    assert!(err.contains("overlay must join regions"), "{err}");

    assert_eq!(code(&sdi(&["validate", "--topology", dir.join("missing").to_str().unwrap()])), 2);
    std::fs::write(&path, "{not json").unwrap();
    assert_eq!(code(&sdi(&["plan", "--topology", path.to_str().unwrap(), "--from", "a", "--to", "b"])), 2);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn plan_max_throughput_uses_the_overlay() {
    let dir = scratch("plan");
    let csv = dir.join("plan.csv");
    let out = sdi(&[
        "plan", "--topology", &scenario("two-region-relay.topology"), "--from", "atlanta", "--to", "srv-sydney",
        "--policy", &scenario("max-throughput.policy"), "--csv", csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("selected,scenario,segments,bottleneck_mbps,rtt_ms,jitter_ms,loss_prob"));
    let selected: Vec<&str> = lines.filter(|l| l.starts_with('*')).collect();
    assert_eq!(selected.len(), 1);
    let cells: Vec<&str> = selected[0].split(',').collect();
    assert_eq!(cells[1], "sdi_via_isp");
    assert_eq!(cells[3], "256");
    assert!(dir.join("plan.csv.manifest.json").exists());
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("plan.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "plan");
    assert_eq!(manifest["tool_version"], env!("CARGO_PKG_VERSION"));
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn infeasible_plan_exits_1() {
    let out = sdi(&[
        "plan", "--topology", &scenario("two-region-relay.topology"), "--from", "atlanta", "--to", "srv-sydney",
        "--min-throughput", "5000",
    ]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("min_throughput_mbps"));
    let unknown = sdi(&["plan", "--topology", &scenario("two-region-relay.topology"), "--from", "atlanta", "--to", "nowhere"]);
    assert_eq!(code(&unknown), 2);
}

#[test]
fn ingest_matches_hand_aggregation() {
    let dir = scratch("ingest");
    let out_path = dir.join("matrix.json");
    let out = sdi(&[
        "ingest", "--atlas-file", &scenario("atlas-results.json"), "--probe-map", &scenario("probe-map.json"), "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(&out_path).unwrap()).unwrap();
    // nova -> sydney pools 200, 202, 204, 198, 196; tokyo -> sydney pools 110.5, 111.5.
    assert_eq!(m["snapshot_time"], 1_700_003_600);
    let entries = m["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 2);
    let e = &entries[0];
    assert_eq!((e["src_region"].as_str(), e["dst_region"].as_str()), (Some("nova"), Some("sydney")));
    assert_eq!(e["avg_ms"], 200.0);
    assert_eq!(e["min_ms"], 196.0);
    assert_eq!(e["max_ms"], 204.0);
    assert_eq!(e["sample_count"], 5);
    assert!((e["stddev_ms"].as_f64().unwrap() - 8f64.sqrt()).abs() < 1e-12);
    let e = &entries[1];
    assert_eq!(e["src_region"], "tokyo");
    assert_eq!(e["avg_ms"], 111.0);
    assert_eq!(e["stddev_ms"], 0.5);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn ingest_without_probe_map_warns() {
    let dir = scratch("unmapped");
    let out_path = dir.join("matrix.json");
    let out = sdi(&["ingest", "--atlas-file", &scenario("atlas-results.json"), "--out", out_path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(stderr(&out).contains("warning"));
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(&out_path).unwrap()).unwrap();
    assert!(m["entries"].as_array().unwrap().iter().all(|e| e["src_region"] == "unmapped"));
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn ingest_errors_map_to_exit_codes() {
    let dir = scratch("ingest-errors");
    let out_path = dir.join("m.json");
    let out = out_path.to_str().unwrap();
    let empty = dir.join("empty.json");
    std::fs::write(&empty, b"").unwrap();
    assert_eq!(code(&sdi(&["ingest", "--atlas-file", empty.to_str().unwrap(), "--out", out])), 2);
    assert_eq!(code(&sdi(&["ingest", "--atlas-file", dir.join("none.json").to_str().unwrap(), "--out", out])), 2);

    let server = StubServer::start(vec![StubResponse::new(404, "{}")]).unwrap();
    assert_eq!(code(&sdi(&["ingest", "--measurement-id", "8", "--base-url", &server.base_url(), "--out", out])), 3);
    let gone = server.base_url();
    drop(server);
    assert_eq!(code(&sdi(&["ingest", "--measurement-id", "8", "--base-url", &gone, "--out", out])), 3);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn api_key_comes_from_the_environment() {
    let dir = scratch("key");
    let out_path = dir.join("m.json");
    let body = std::fs::read(scenario("atlas-results.json")).unwrap();
    let server = StubServer::start(vec![StubResponse::new(200, body)]).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_sdi"))
        .args(["ingest", "--measurement-id", "12", "--base-url", &server.base_url(), "--out", out_path.to_str().unwrap()])
        .env("SDI_ATLAS_KEY", "from-env")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let seen = server.requests();
    assert_eq!(seen[0].path, "/api/v2/measurements/12/results/");
    assert_eq!(seen[0].authorization.as_deref(), Some("Key from-env"));
    assert_eq!(code(&sdi(&["ingest", "--measurement-id", "12", "--api-key", "x", "--out", "m.json"])), 64);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn schedule_commit_and_slo() {
    let dir = scratch("schedule");
    let reg = dir.join("registry.json");
    std::fs::copy(scenario("eval-registry.json"), &reg).unwrap();
    let topo = scenario("atlanta-eval.topology");
    let csv = dir.join("placement.csv");
    let out = sdi(&[
        "schedule", "--topology", &topo, "--registry", reg.to_str().unwrap(), "--workflow", &scenario("eval-workflow.json"),
        "--commit", "--csv", csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let after: serde_json::Value = serde_json::from_slice(&std::fs::read(&reg).unwrap()).unwrap();
    let load: u64 = after.as_array().unwrap().iter().map(|i| i["load_units"].as_u64().unwrap()).sum();
    assert_eq!(load, 3);
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 1 + 4);

    let tight = dir.join("tight.json");
    std::fs::write(
        &tight,
        r#"{"id": "tight", "steps": ["ingest", "analyze"], "origin": "atlanta", "destination": "srv-sydney", "max_total_rtt_ms": 50}"#,
    )
    .unwrap();
    let before = std::fs::read(&reg).unwrap();
    let out = sdi(&["schedule", "--topology", &topo, "--registry", reg.to_str().unwrap(), "--workflow", tight.to_str().unwrap(), "--commit"]);
    assert_eq!(code(&out), 1);
    assert_eq!(std::fs::read(&reg).unwrap(), before);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn simulate_is_reproducible_and_compare_orders_jitter() {
    let dir = scratch("sim");
    let topo = scenario("atlanta-eval.topology");
    let mut series = Vec::new();
    for i in 0..2 {
        let csv = dir.join(format!("s{i}.csv"));
        let out = sdi(&[
            "simulate", "--topology", &topo, "--from", "atlanta", "--to", "srv-tokyo", "--seed", "9", "--samples", "500",
            "--csv", csv.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        series.push(std::fs::read(&csv).unwrap());
    }
    assert_eq!(series[0], series[1]);
    assert_eq!(String::from_utf8_lossy(&series[0]).lines().count(), 501);

    let summary = dir.join("summary.csv");
    let out = sdi(&[
        "compare", "--topology", &topo, "--from", "atlanta", "--to", "srv-sydney", "--jobs", "2", "--summary-csv",
        summary.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let mut rdr = csv::Reader::from_path(&summary).unwrap();
    let rows: Vec<(String, f64)> = rdr.records().map(|r| r.unwrap()).map(|r| (r[0].to_string(), r[2].parse().unwrap())).collect();
    let names: Vec<&str> = rows.iter().map(|r| r.0.as_str()).collect();
    assert_eq!(names, ["isp_only", "sdi_via_isp", "sdi_direct_connect"]);
    assert!(rows[2].1 < rows[1].1 && rows[1].1 < rows[0].1);
    assert!(stdout(&out).contains("sdi_direct_connect"));
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn campaign_reports_feasibility() {
    let ok = sdi(&["campaign", "--probes", "491", "--days", "33", "--balance", "10000000"]);
    assert_eq!(code(&ok), 0);
    assert!(stdout(&ok).contains("388872"));
    assert_eq!(code(&sdi(&["campaign", "--probes", "491", "--days", "33", "--balance", "1000"])), 1);
    assert_eq!(code(&sdi(&["campaign", "--probes", "0", "--days", "33", "--balance", "1000"])), 2);
}
