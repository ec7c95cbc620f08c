use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

use ipir_cli::reports::{LocationReport, PolicyOutput, TwoRequestReport};
use serde_json::Value;

fn ipir(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ipir")).args(args).output().unwrap()
}

fn examples() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples")
}

fn example(name: &str) -> String {
    examples().join(name).display().to_string()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn two_message_scenario() {
    let out = ipir(&["run", &example("table1.json")]);
    let v = json(&out);
    assert_eq!(v["cost_x_expected"], "5/4");
    assert_eq!(v["cost_s"], "3/2");
    assert_eq!(v["decoded_ok"], true);
    let checks = v["audits"]["checks"].as_array().unwrap();
    assert!(checks.len() >= 3 && checks.iter().all(|c| c["pass"] == true));
    let back: TwoRequestReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(serde_json::to_value(&back).unwrap(), v);
}

#[test]
fn three_message_scenario() {
    let v = json(&ipir(&["run", &example("table4.json")]));
    assert_eq!(v["summary"]["size_law"], serde_json::json!(["1/2", "2/5", "1/10"]));
    assert_eq!(v["summary"]["theta"], v["summary"]["size_law"]);
    assert_eq!(v["summary"]["cost"], "51/40");
    assert_eq!(v["summary"]["theorem_bound"], "51/40");
    let back: PolicyOutput = serde_json::from_value(v.clone()).unwrap();
    assert_eq!(serde_json::to_value(&back).unwrap(), v);
}

#[test]
fn location_scenario_round_trips() {
    let out = ipir(&["run", &example("location.json")]);
    let v = json(&out);
    assert_eq!(v["steps"].as_array().unwrap().len(), 5);
    assert!(v["audits"]["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
    let back: LocationReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(serde_json::to_value(&back).unwrap(), v);
    assert_eq!(out.stdout, ipir(&["run", &example("location.json")]).stdout);
}

#[test]
fn redaction_drops_true_locations() {
    let v = json(&ipir(&[
        "simulate-location",
        "--model",
        &example("sticky_model.json"),
        "--schedule",
        &example("schedule.json"),
        "--horizon",
        "3",
        "--redact",
    ]));
    assert!(v.get("trace").is_none());
    assert!(v["steps"].as_array().unwrap().iter().all(|s| s.get("x").is_none()));
    assert_eq!(v["horizon"], 3);
}

#[test]
fn reports_are_deterministic() {
    let args = ["two-request", "--joint", &example("pair_joint.json"), "--trials", "500", "--seed", "9"];
    let a = ipir(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, ipir(&args).stdout);
    assert_ne!(a.stdout, ipir(&["two-request", "--joint", &example("pair_joint.json"), "--trials", "500"]).stdout);
}

#[test]
fn malformed_input_exits_2_naming_the_entry() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"K": 2, "p": [["3/8", "1/8"], ["1/8", "oops"]]}"#).unwrap();
    let out = ipir(&["two-request", "--joint", bad.to_str().unwrap(), "--trials", "5"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("p[1][1]") && err.contains("bad.json"), "{err}");

    std::fs::write(&bad, r#"{"K": 2, "p": [["1/2", "1/8"], ["1/8", "3/8"]]}"#).unwrap();
    assert_eq!(ipir(&["solve-lp", "--joint", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(ipir(&["greedy", "--cond", "/no/such/file"]).status.code(), Some(2));
    assert_eq!(ipir(&["two-request"]).status.code(), Some(2));
}

#[test]
fn leaky_policy_exits_3_with_witness() {
    let dir = tempfile::tempdir().unwrap();
    let leaky = dir.path().join("leaky.json");
    let entries: Vec<Value> =
        (1..=2).flat_map(|s| (1..=2).map(move |x| serde_json::json!({"s": s, "x": x, "u": [x], "p": "1"}))).collect();
    std::fs::write(&leaky, serde_json::json!({"K": 2, "entries": entries}).to_string()).unwrap();
    let report = dir.path().join("report.json");
    let out = ipir(&[
        "two-request",
        "--joint",
        &example("pair_joint.json"),
        "--policy",
        leaky.to_str().unwrap(),
        "--trials",
        "50",
        "--output",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let shown = String::from_utf8_lossy(&out.stdout);
    assert!(shown.contains("[FAIL] I(S;U)") && shown.contains("witness:"), "{shown}");
    assert!(report.exists());
}

#[test]
fn rendering() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let out = ipir(&[
        "two-request",
        "--joint",
        &example("pair_joint.json"),
        "--policy",
        &example("pair_policy.json"),
        "--trials",
        "20",
        "--audit",
        "none",
        "--output",
        report.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let shown = String::from_utf8_lossy(&out.stdout);
    assert!(shown.contains("cost_x_expected: 5/4 (≈1.2500)"), "{shown}");
    assert!(shown.contains("no audits run"));
    let again = ipir(&["report", report.to_str().unwrap()]);
    assert_eq!(again.stdout, out.stdout);
}

#[test]
fn solved_policies_feed_back_in() {
    let dir = tempfile::tempdir().unwrap();
    let policy = dir.path().join("policy.json");
    let out = ipir(&["solve-lp", "--joint", &example("pair_joint.json"), "--output", policy.to_str().unwrap()]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&policy).unwrap()).unwrap();
    assert_eq!(v["summary"]["cost"], "5/4");
    let run = json(&ipir(&[
        "two-request",
        "--joint",
        &example("pair_joint.json"),
        "--policy",
        policy.to_str().unwrap(),
        "--trials",
        "100",
    ]));
    assert_eq!(run["cost_x_expected"], "5/4");
}

#[test]
fn transcripts_audit_both_ways() {
    let dir = tempfile::tempdir().unwrap();
    let transcript = dir.path().join("t.json");
    let v = json(&ipir(&[
        "two-request",
        "--joint",
        &example("pair_joint.json"),
        "--trials",
        "30000",
        "--audit",
        "empirical",
        "--transcript",
        transcript.to_str().unwrap(),
    ]));
    assert_eq!(v["audit_handle"], transcript.to_str().unwrap());
    let t = transcript.to_str().unwrap();
    for mode in ["--exact", "--empirical"] {
        let a = json(&ipir(&["audit", "--transcript", t, mode]));
        let checks = a["checks"].as_array().unwrap();
        assert!(checks.len() >= 3 && checks.iter().all(|c| c["pass"] == true), "{mode}: {a}");
    }
}

struct Serving(Child);

impl Drop for Serving {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn spawn_server(store: &Path) -> (Serving, String) {
    let mut child = Command::new(env!("CARGO_BIN_EXE_ipir"))
        .args(["serve", "--store", store.to_str().unwrap(), "--listen", "127.0.0.1:0"])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stderr.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").unwrap().to_string();
    (Serving(child), addr)
}

#[test]
fn networked_runs_match_local_ones() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store.bin");
    let up =
        json(&ipir(&["upload", "--store", store.to_str().unwrap(), "--messages", "2", "--length", "8", "--seed", "4"]));
    assert_eq!(up["bytes"], 10);
    let (_a, addr_a) = spawn_server(&store);
    let (_b, addr_b) = spawn_server(&store);
    let remote = format!("{addr_a},{addr_b}");
    let s = store.to_str().unwrap();

    let base = ["two-request", "--joint", &example("pair_joint.json"), "--trials", "300", "--store", s];
    let local = ipir(&base);
    let mut with_remote = base.to_vec();
    with_remote.extend(["--remote", &remote]);
    let networked = ipir(&with_remote);
    assert!(networked.status.success(), "{}", String::from_utf8_lossy(&networked.stderr));
    assert_eq!(local.stdout, networked.stdout);
    assert!(String::from_utf8_lossy(&networked.stderr).contains("answer bits"));

    let base = [
        "simulate-location",
        "--model",
        &example("sticky_model.json"),
        "--schedule",
        &example("schedule.json"),
        "--store",
        s,
        "--seed",
        "2",
    ];
    let mut with_remote = base.to_vec();
    with_remote.extend(["--remote", &remote]);
    assert_eq!(ipir(&base).stdout, ipir(&with_remote).stdout);

    let wrong = ipir(&["two-request", "--joint", &example("three_way_cond.json"), "--remote", &remote]);
    assert_eq!(wrong.status.code(), Some(2));
}

#[test]
fn unreachable_servers_fail_cleanly() {
    let out = ipir(&[
        "two-request",
        "--joint",
        &example("pair_joint.json"),
        "--remote",
        "127.0.0.1:1,127.0.0.1:1",
        "--timeout-ms",
        "300",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("127.0.0.1:1"));
}

#[test]
fn logging_goes_to_stderr() {
    let out = Command::new(env!("CARGO_BIN_EXE_ipir"))
        .args(["greedy", "--cond", &example("three_way_cond.json")])
        .env("IPIR_LOG", "debug")
        .output()
        .unwrap();
    assert!(out.status.success());
    serde_json::from_slice::<Value>(&out.stdout).unwrap();
}
