use std::path::PathBuf;
use std::process::{Command, Output};

use pwlmip::emip::EmipModel;
use pwlmip::milp::parse_lp;
use pwlmip::reduction::lower;
use serde_json::Value;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .display()
        .to_string()
}

fn pwlmip(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pwlmip"))
        .args(args)
        .env_remove("PWLMIP_NODE_LIMIT")
        .output()
        .expect("binary runs")
}

fn report(args: &[&str]) -> Value {
    let out = pwlmip(args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

#[test]
fn wsm_min_cost_is_three() {
    let r = report(&["--json", "--minimize-cost", "wsm", &fixture("wsm3.json")]);
    assert_eq!(r["status"], "feasible");
    assert_eq!(r["cost"], 3);
    assert_eq!(r["solution"]["chosen"], serde_json::json!([1, 2]));
}

#[test]
fn empty_model_is_feasible() {
    let r = report(&["--json", "solve-emip", &fixture("empty.json")]);
    assert_eq!(r["status"], "feasible");
    assert_eq!(r["solution"]["assignment"], serde_json::json!({}));
}

#[test]
fn emip_objective_is_reported_exactly() {
    let r = report(&["--json", "solve-emip", &fixture("pwl_cost.json")]);
    assert_eq!(r["status"], "feasible");
    assert_eq!(r["solution"]["objective"], "3");
    assert_eq!(r["solution"]["assignment"]["x"], "3");
}

#[test]
fn almost_cover_stays_under_bound() {
    let r = report(&[
        "--json",
        "mmc-approx",
        "--epsilon",
        "1/2",
        &fixture("uniformish.json"),
    ]);
    assert_eq!(r["status"], "feasible");
    let total = r["solution"]["total_miss"].as_u64().unwrap();
    let bound: u64 = r["solution"]["bound"].as_str().unwrap().parse().unwrap();
    assert!(total < bound, "{total} >= {bound}");
    assert!(r["cost"].as_u64().unwrap() <= 3);
    assert!(r["solution"].get("decomposition").is_none());
}

#[test]
fn decomposition_dump_lists_vectors() {
    let r = report(&[
        "--json",
        "--dump-decomposition",
        "mmc-approx",
        "--epsilon",
        "1/2",
        &fixture("uniformish.json"),
    ]);
    let vectors = r["solution"]["decomposition"]["vectors"]
        .as_array()
        .unwrap();
    assert!(!vectors.is_empty());
    assert!(vectors.iter().all(|v| v["beta"].as_u64().unwrap() >= 1));
}

#[test]
fn reports_are_deterministic() {
    for args in [
        vec!["--json", "--seed", "7", "mmc-approx", "--epsilon", "1/4"],
        vec!["--json", "--minimize-cost", "bribery"],
    ] {
        let file = if args.contains(&"bribery") {
            fixture("approval.json")
        } else {
            fixture("uniformish.json")
        };
        let mut full = args.clone();
        full.push(&file);
        let a = pwlmip(&full);
        let b = pwlmip(&full);
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout);
    }
}

#[test]
fn export_lp_round_trips_to_lowered_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("model.lp");
    let input = fixture("pwl_cost.json");
    let run = pwlmip(&["export-lp", &input, "-o", out.to_str().unwrap()]);
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );

    let model = EmipModel::from_json(&std::fs::read_to_string(&input).unwrap()).unwrap();
    let (expected, _) = lower(&model.normalize()).unwrap();
    let parsed = parse_lp(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(parsed, expected);
}

#[test]
fn malformed_json_exits_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        "{\n  \"format\": \"cover-v1\",\n  \"m\": 2,\n  \"sets\": [\n}\n",
    )
    .unwrap();
    let out = pwlmip(&["wsm", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json"), "{err}");
    assert!(err.contains("line 5"), "{err}");
}

#[test]
fn wrong_format_tag_exits_2() {
    let out = pwlmip(&["wsm", &fixture("empty.json")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cover-v1"));
}

#[test]
fn wrong_election_rule_exits_2() {
    let out = pwlmip(&["ccdv", &fixture("borda.json")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn node_limit_exhaustion_exits_3() {
    let out = pwlmip(&[
        "--json",
        "--node-limit",
        "1",
        "solve-emip",
        &fixture("parity.json"),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["status"], "resource-exhausted");
}

#[test]
fn node_limit_reads_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_pwlmip"))
        .args(["solve-emip", &fixture("parity.json")])
        .env("PWLMIP_NODE_LIMIT", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn infeasible_exits_0() {
    let r = report(&["--json", "solve-emip", &fixture("parity.json")]);
    assert_eq!(r["status"], "infeasible");
    let r = report(&["--json", "ccav", &fixture("approval.json")]);
    assert_eq!(r["status"], "infeasible");
    assert_eq!(r["solution"]["mode"], "priced");
}

#[test]
fn manipulation_reports_cost() {
    let r = report(&[
        "--json",
        "--minimize-cost",
        "ccdv",
        &fixture("approval.json"),
    ]);
    assert_eq!(r["status"], "feasible");
    assert_eq!(r["cost"], 2);
    assert_eq!(r["solution"]["kind"], "delete");

    let r = report(&[
        "--json",
        "--minimize-cost",
        "scoring-ccdv",
        &fixture("borda.json"),
    ]);
    assert_eq!(r["status"], "feasible");
    assert_eq!(r["cost"], 2);
}

#[test]
fn text_output_is_default() {
    let out = pwlmip(&["wsm", &fixture("wsm3.json")]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("status: feasible"), "{text}");
}
