use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn consensus(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_consensus")).args(args).current_dir(cwd).output().unwrap()
}

fn json(bytes: &[u8]) -> serde_json::Value {
    serde_json::from_slice(bytes).unwrap()
}

fn fan_in(dir: &Path) {
    fs::write(dir.join("fan.edges"), "3\n2 0 1\n2 1 1\n").unwrap();
}

#[test]
fn analyze_reports_blocks_and_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    fan_in(dir.path());
    let out = consensus(&["analyze", "fan.edges"], dir.path());
    assert!(out.status.success());
    let v = json(&out.stdout);
    assert_eq!(v["n_isolated"], 2);
    assert_eq!(v["predicts_consensus"], false);
    assert_eq!(v["spectrum"]["zero_multiplicity"], 2);
    assert_eq!(v["blocks"][2]["kind"], "absorbing");
}

#[test]
fn json_graphs_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("g.json"), r#"{"n": 2, "edges": [[0, 1, 1.0], [1, 0, 1.0]]}"#).unwrap();
    let out = consensus(&["analyze", "g.json"], dir.path());
    assert!(out.status.success());
    assert_eq!(json(&out.stdout)["spectrum"]["eigenvalues"][1][0], 2.0);
}

#[test]
fn validation_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.edges"), "2\n0 1 -3\n").unwrap();
    let out = consensus(&["analyze", "bad.edges"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let out = consensus(&["steer", "--s0", "0,1", "--target", "5"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    fan_in(dir.path());
    let out = consensus(&["simulate-det", "fan.edges", "--s0", "1,2", "--t-end", "1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = consensus(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = consensus(&["analyze", "missing.edges"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn deterministic_outputs_and_formats() {
    let dir = tempfile::tempdir().unwrap();
    fan_in(dir.path());
    let out = consensus(&["simulate-det", "fan.edges", "--s0", "1,-1,0.5", "--t-end", "30", "--out", "det"], dir.path());
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("det/trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,s_0,s_1,s_2\n"));
    let last: Vec<f64> = csv.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!((last[3] - 0.0).abs() < 1e-9);
    assert!(fs::read_to_string(dir.path().join("det/variance.csv")).unwrap().starts_with("t,v\n"));
    let meta = json(&fs::read(dir.path().join("det/trajectory.meta.json")).unwrap());
    assert_eq!(meta["method"], "rk4");

    let out = consensus(&["simulate-det", "fan.edges", "--s0", "1,-1,0", "--t-end", "1", "--format", "json"], dir.path());
    let v = json(&out.stdout);
    assert_eq!(v["s"][0], serde_json::json!([1.0, -1.0, 0.0]));
}

#[test]
fn stochastic_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    fan_in(dir.path());
    for out_dir in ["a", "b"] {
        let out = consensus(
            &["simulate-sto", "fan.edges", "--s0", "1,-1,0", "--t-end", "5", "--seed", "9", "--out", out_dir],
            dir.path(),
        );
        assert!(out.status.success());
    }
    for f in ["events.csv", "initial.json"] {
        assert_eq!(fs::read(dir.path().join("a").join(f)).unwrap(), fs::read(dir.path().join("b").join(f)).unwrap());
    }
    let out = consensus(
        &["simulate-sto", "fan.edges", "--s0", "1,-1,0", "--t-end", "5", "--reps", "50", "--grid-points", "6"],
        dir.path(),
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("t,mean_0,mean_1,mean_2,variance,se_variance,absorbed_fraction\n"));
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn steer_writes_graph_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = consensus(&["steer", "--s0", "0,1,-2,5", "--target", "0.5", "--out", "st"], dir.path());
    assert!(out.status.success());
    let report = json(&fs::read(dir.path().join("st/steer.json")).unwrap());
    assert_eq!(report["max_node"], 3);
    assert_eq!(report["min_node"], 2);
    for x in report["predicted_limit"].as_array().unwrap() {
        assert!((x.as_f64().unwrap() - 0.5).abs() < 1e-9);
    }
    let out = consensus(&["analyze", "st/steered.edges"], dir.path());
    assert_eq!(json(&out.stdout)["n_isolated"], 1);
}

#[test]
fn scenarios_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let out = consensus(&["scenario", "ring", "12", "2", "--seed", "4", "--out", "ring"], dir.path());
    assert!(out.status.success());
    let out = consensus(
        &["compare", "ring/graph.edges", "--s0", "ring/s0.json", "--reps", "100", "--grid-points", "11", "--seed", "4", "--out", "cmp"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json(&out.stdout);
    assert_eq!(summary["n_nodes"], 12);
    assert!(dir.path().join("cmp/comparison.csv").exists());
    assert!(dir.path().join("cmp/manifest.json").exists());

    let out = consensus(&["scenario", "battle", "--format", "json"], dir.path());
    let v = json(&out.stdout);
    assert_eq!(v["analysis"]["n_isolated"], 2);
    assert_eq!(v["graph"]["n"], 210);
    let out = consensus(&["scenario", "ring", "12"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_config_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("exp.json"),
        r#"{"scenario": {"name": "bridged_clusters", "m": 4}, "model": "both", "seed": 2, "reps": 100, "grid_points": 11}"#,
    )
    .unwrap();
    for out_dir in ["r1", "r2"] {
        let out = consensus(&["run", "exp.json", "--out", out_dir], dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for entry in fs::read_dir(dir.path().join("r1")).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(
            fs::read(dir.path().join("r1").join(&name)).unwrap(),
            fs::read(dir.path().join("r2").join(&name)).unwrap(),
            "{name:?}"
        );
    }
    let manifest = json(&fs::read(dir.path().join("r1/manifest.json")).unwrap());
    assert_eq!(manifest["config"]["seed"], 2);
}
