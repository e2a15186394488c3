use std::path::Path;
use std::process::{Command, Output};

fn resmute(out_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_resmute"))
        .arg("--out-dir")
        .arg(out_dir)
        .args(args)
        .output()
        .expect("spawn resmute")
}

fn manifest(dir: &Path) -> String {
    std::fs::read_to_string(dir.join("manifest.txt")).expect("manifest")
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn generate_solve_analyze_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let scen = tmp.path().join("s.json");
    let out = resmute(tmp.path(), &["generate", "--seed", "2", "--out", scen.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let solve_dir = tmp.path().join("solve");
    assert!(resmute(&solve_dir, &["solve", "--scenario", scen.to_str().unwrap()]).status.success());
    let rows = csv_rows(&solve_dir.join("allocation.csv"));
    assert_eq!(rows[0], ["service", "cell", "mode", "allocation", "utility"]);
    let utilities: Vec<f64> = rows[1..].iter().map(|r| r[4].parse().unwrap()).collect();
    let (lo, hi) = utilities.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &u| (lo.min(u), hi.max(u)));
    assert!(hi - lo <= 1e-6);
    let m = manifest(&solve_dir);
    assert!(m.starts_with("command = solve\n"));
    assert!(m.ends_with("status = ok\n"));

    let analyze_dir = tmp.path().join("analyze");
    assert!(resmute(&analyze_dir, &["analyze", "--scenario", scen.to_str().unwrap()]).status.success());
    let rows = csv_rows(&analyze_dir.join("w_inf.csv"));
    assert_eq!(rows[0].last().unwrap(), "w_inf");
    assert_eq!(rows.len() - 1, utilities.len());
    assert!(rows[1..].iter().all(|r| r[3].parse::<f64>().unwrap() >= 0.0));
}

#[test]
fn montecarlo_writes_every_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = resmute(
        tmp.path(),
        &["montecarlo", "--trials", "6", "--seed", "3", "--protocols", "non-muting,successive"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for file in ["trials.csv", "cdf.csv", "binned.csv", "failures.csv"] {
        assert!(tmp.path().join(file).exists(), "{file} missing");
    }
    let rows = csv_rows(&tmp.path().join("trials.csv"));
    assert_eq!(rows[0], ["trial", "seed", "services", "mean_distance", "non-muting", "successive"]);
    assert_eq!(rows.len(), 7);
    assert_eq!(rows[1][1], "3");
}

#[test]
fn missing_scenario_is_a_filesystem_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = resmute(tmp.path(), &["solve", "--scenario", "/nonexistent/scenario.json"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(manifest(tmp.path()).contains("status = error"));
}

#[test]
fn malformed_scenario_is_rejected_with_a_schema_message() {
    let tmp = tempfile::tempdir().unwrap();
    let scen = tmp.path().join("bad.json");
    let doc = r#"{"cells": 1, "services": [0], "bandwidth_hz": 1.0, "neighbors": [[]],
        "noise": [0.1], "demands": [1.0], "powers": [1.0]}"#;
    std::fs::write(&scen, doc).unwrap();
    let out = resmute(tmp.path(), &["solve", "--scenario", scen.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("missing field `gains`"), "{stderr}");
    assert!(manifest(tmp.path()).contains("gains"));
}

#[test]
fn unknown_protocol_is_invalid_input() {
    let tmp = tempfile::tempdir().unwrap();
    let out = resmute(tmp.path(), &["montecarlo", "--trials", "2", "--protocols", "bogus"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn oracle_refuses_large_problems() {
    let tmp = tempfile::tempdir().unwrap();
    let scen = tmp.path().join("s.json");
    assert!(resmute(tmp.path(), &["generate", "--out", scen.to_str().unwrap()]).status.success());
    let out = resmute(tmp.path(), &["oracle", "--scenario", scen.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn bad_flag_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(resmute(tmp.path(), &["solve", "--no-such-flag"]).status.code(), Some(2));
}
