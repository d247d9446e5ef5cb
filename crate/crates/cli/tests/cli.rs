use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chainscreen"))
}

fn three_types() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/three_types.json")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn solve_writes_solution_and_plot_table() {
    let dir = tempfile::tempdir().unwrap();
    let (sol, csv) = (dir.path().join("sol.json"), dir.path().join("plot.csv"));
    let o = run(&["solve", three_types().to_str().unwrap(), "--out", sol.to_str().unwrap(), "--csv", csv.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&fs::read_to_string(&sol).unwrap()).unwrap();
    assert!((v["value"].as_f64().unwrap() - 34.0 / 15.0).abs() < 1e-9);
    assert_eq!(v["promise"], serde_json::json!([0.8, 0.8, 2.0]));
    assert_eq!(v["K"], 1);
    assert_eq!(v["segments"][0]["label"], "CONSTANT");
    let table = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "type,u_c,upper_closure,lower_closure,U");
    assert_eq!(lines.len(), 4);
    let u: Vec<&str> = lines[1..].iter().map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(u, vec!["0.8", "0.8", "2"]);
}

#[test]
fn all_solvers_agree_on_three_types() {
    let values: Vec<f64> = ["dp", "structural", "brute-force"]
        .iter()
        .map(|m| stdout_json(&run(&["solve", three_types().to_str().unwrap(), "--method", m]))["value"].as_f64().unwrap())
        .collect();
    assert!(values.iter().all(|v| (v - 34.0 / 15.0).abs() < 1e-9), "{values:?}");
}

#[test]
fn oracle_check_reports_equality() {
    let o = run(&["oracle-check", three_types().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "dp == brute_force");
}

#[test]
fn oracle_sweep_is_seeded_by_environment() {
    let a = bin().args(["oracle-check", "--sweep", "40"]).env("CHAINSCREEN_SEED", "11").output().unwrap();
    assert_eq!(code(&a), 0);
    assert!(String::from_utf8_lossy(&a.stdout).contains("seed 11"));
}

#[test]
fn malformed_input_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"types\": [1, 2],\n \"weights\": oops}").unwrap();
    let o = run(&["solve", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    assert_eq!(code(&run(&["solve", "/nonexistent/file.json"])), 1);
}

#[test]
fn unwritable_output_exits_with_one() {
    let o = run(&["benchmark", three_types().to_str().unwrap(), "--out", "/nonexistent/dir/out.json"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn benchmark_reports_closures() {
    let v = stdout_json(&run(&["benchmark", three_types().to_str().unwrap()]));
    assert_eq!(v["u_c"], serde_json::json!([1.0, 0.0, 2.0]));
    assert_eq!(v["upper_closure"], serde_json::json!([1.0, 1.0, 2.0]));
    assert_eq!(v["lower_closure"], serde_json::json!([0.0, 0.0, 2.0]));
    assert_eq!(v["ubar"], 0.0);
    assert_eq!(v["K"], 1);
}

#[test]
fn segments_pass_their_count_checks() {
    let o = run(&["segments", three_types().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["constant_segments"], 1);
    assert_eq!(v["follow_segments"], 1);
}

#[test]
fn outputs_are_byte_deterministic() {
    let path = three_types();
    for verb in ["solve", "benchmark", "segments"] {
        let a = [verb, path.to_str().unwrap()];
        assert_eq!(run(&a).stdout, run(&a).stdout);
    }
    let s1 = run(&["scenario", "civil", "--types", "5"]).stdout;
    let s2 = run(&["scenario", "civil", "--types", "5"]).stdout;
    assert_eq!(s1, s2);
}

#[test]
fn compare_modes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["compare", "--mode", "expansion", three_types().to_str().unwrap(), "--map", "1,2,2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert!(v["resolved_opt"].as_f64().unwrap() >= 34.0 / 15.0 - 1e-9);

    // shift every frontier up by one half
    let mut text: Value = serde_json::from_str(&fs::read_to_string(three_types()).unwrap()).unwrap();
    for f in text["surface"]["frontiers"].as_array_mut().unwrap() {
        f["height"] = (f["height"].as_f64().unwrap() + 0.5).into();
    }
    let up = dir.path().join("up.json");
    fs::write(&up, text.to_string()).unwrap();
    let v = stdout_json(&run(&["compare", "--mode", "expansion", three_types().to_str().unwrap(), up.to_str().unwrap()]));
    assert!((v["resolved_opt"].as_f64().unwrap() - v["base_opt"].as_f64().unwrap() - 0.5).abs() < 1e-9);

    let mut top: Value = serde_json::from_str(&fs::read_to_string(three_types()).unwrap()).unwrap();
    top["weights"] = serde_json::json!([0.0, 0.0, 1.0]);
    let topf = dir.path().join("top.json");
    fs::write(&topf, top.to_string()).unwrap();
    let o = run(&["compare", "--mode", "fosd", three_types().to_str().unwrap(), topf.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    // the reverse direction is not a dominance and is an input error
    let o = run(&["compare", "--mode", "fosd", topf.to_str().unwrap(), three_types().to_str().unwrap()]);
    assert_eq!(code(&o), 1);

    let mut low: Value = serde_json::from_str(&fs::read_to_string(three_types()).unwrap()).unwrap();
    low["default"] = serde_json::json!([[-0.5, -1.0], [0.0, 0.0]]);
    let lowf = dir.path().join("low.json");
    fs::write(&lowf, low.to_string()).unwrap();
    let o = run(&["compare", "--mode", "default", three_types().to_str().unwrap(), lowf.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(stdout_json(&o)["pass"], true);
}

#[test]
fn scenario_files_solve_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ["fda", "civil", "ceo"] {
        let f = dir.path().join(format!("{kind}.json"));
        assert_eq!(code(&run(&["scenario", kind, "--types", "9", "--out", f.to_str().unwrap()])), 0);
        let text = fs::read_to_string(&f).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["reference_u_c"].as_array().unwrap().len(), 9);
        let s = chainscreen::Scenario::from_json(&text).unwrap();
        assert_eq!(s.to_json().unwrap() + "\n", text);
        assert_eq!(code(&run(&["solve", f.to_str().unwrap()])), 0);
    }
}

#[test]
fn rationalize_both_ways() {
    let dir = tempfile::tempdir().unwrap();
    let cand = dir.path().join("cand.json");
    fs::write(&cand, r#"{"u_c": [1, 0, 2], "candidate": [0.8, 0.8, 2]}"#).unwrap();
    let o = run(&["rationalize", "--by", "dist", cand.to_str().unwrap(), "--scenario", three_types().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert_eq!(v["weights"], serde_json::json!([0.0, 0.0, 1.0]));
    assert_eq!(v["reproduces"], true);
    let o = run(&["rationalize", "--by", "tech", cand.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout_json(&o)["reproduces"], true);

    fs::write(&cand, r#"{"u_c": [2, 1.5, 1], "candidate": [1.2, 1.2, 1.2]}"#).unwrap();
    assert_eq!(code(&run(&["rationalize", "--by", "dist", cand.to_str().unwrap()])), 1);
}
