use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gaplab_core::potential::Potential1D;
use gaplab_core::sturm_liouville::{gap_lower_bounds, solve_1d};
use serde_json::{json, Value};

fn gaplab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaplab")).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn interval_scenario(name: &str, potential: Value, comparison: Value) -> Value {
    json!({
        "name": name,
        "domain": {"kind": "interval", "lo": -0.5, "hi": 0.5},
        "potential": potential,
        "comparison": comparison,
        "grid": {"h": 1.0 / 512.0, "comparison_cells": 1024},
        "checks": ["gap-comparison", "diameter-bound", "alpha-bounds", "phi-envelope", "psi-shape"]
    })
}

fn write_config(dir: &Path, scenarios: Vec<Value>) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&json!({"seed": 3, "scenarios": scenarios})).unwrap()).unwrap();
    path
}

fn flat() -> Value {
    json!({"kind": "constant", "value": 0.0})
}

#[test]
fn bounds_match_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), vec![interval_scenario("flat", flat(), flat())]);
    let out = gaplab(&["bounds", cfg.to_str().unwrap(), "--s", "0.25,0.5,0.75"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = stdout_json(&out)["table"]["rows"].as_array().unwrap().clone();
    let c = solve_1d(&Potential1D::zero(), 1.0, 1024).unwrap();
    let want = gap_lower_bounds(&c, &[0.25, 0.5, 0.75]).unwrap();
    assert_eq!(rows.len(), 3);
    for (got, want) in rows.iter().zip(&want.rows) {
        assert_eq!(got["s"].as_f64().unwrap(), want.s);
        // Default serde_json parsing is correct to within an ulp, not exactly round-trip.
        assert!((got["gap_bound"].as_f64().unwrap() / want.gap_bound - 1.0).abs() < 1e-14);
    }
}

#[test]
fn gapcheck_exit_code_follows_the_margin() {
    let dir = tempfile::tempdir().unwrap();
    let steep = json!({"kind": "polynomial-even", "coefficients": [0.0, 400.0]});
    let cfg = write_config(
        dir.path(),
        vec![interval_scenario("ok", flat(), flat()), interval_scenario("steep", flat(), steep)],
    );
    let ok = gaplab(&["gapcheck", cfg.to_str().unwrap(), "--scenario", "ok"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(stdout_json(&ok)["margin"].as_f64().unwrap().abs() < 1e-3);
    let bad = gaplab(&["gapcheck", cfg.to_str().unwrap(), "--scenario", "steep"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout_json(&bad)["margin"].as_f64().unwrap() < 0.0);
}

#[test]
fn solve1d_sees_a_constant_shift() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        vec![
            interval_scenario("base", flat(), flat()),
            interval_scenario("shifted", flat(), json!({"kind": "constant", "value": 7.0})),
        ],
    );
    let get = |name: &str| {
        let out = gaplab(&["solve1d", cfg.to_str().unwrap(), "--scenario", name]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        stdout_json(&out)
    };
    let (a, b) = (get("base"), get("shifted"));
    for key in ["lambda1", "lambda2"] {
        let d = b[key].as_f64().unwrap() - a[key].as_f64().unwrap();
        assert!((d - 7.0).abs() < 1e-8, "{key}: {d}");
    }
    assert!((b["gap"].as_f64().unwrap() - a["gap"].as_f64().unwrap()).abs() < 1e-8);
}

#[test]
fn usage_and_config_errors_exit_with_two() {
    assert_eq!(gaplab(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(gaplab(&["solve1d", "/nonexistent/config.json"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"scenarios": [{"name": "x", "unknown": 1}]}"#).unwrap();
    let out = gaplab(&["run", path.to_str().unwrap(), "--output", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("gaplab: "));
}

#[test]
fn empty_scenario_list_runs_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), vec![]);
    let outdir = dir.path().join("out");
    let out = gaplab(&["run", cfg.to_str().unwrap(), "--output", outdir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(outdir.join("report.json").exists());
    assert_eq!(stdout_json(&out)["scenarios"].as_array().unwrap().len(), 0);
}

#[test]
fn run_writes_one_directory_per_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), vec![interval_scenario("flat", flat(), flat())]);
    let outdir = dir.path().join("from-env");
    let out = Command::new(env!("CARGO_BIN_EXE_gaplab"))
        .args(["run", cfg.to_str().unwrap()])
        .env("GAPLAB_OUTPUT_DIR", &outdir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(outdir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], json!(true));
}
