//! End-to-end runs of the `fanova-shap` binary.

use std::path::Path;
use std::process::{Command, Output};

use fanova_shap::attribution::Attribution;
use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fanova-shap"))
        .args(args)
        .env_remove("RUST_LOG")
        .env_remove("FANOVA_SHAP_WORKERS")
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn phi(v: &Value) -> Vec<f64> {
    v["phi"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn error_of(out: &Output) -> Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().rev().find(|l| l.starts_with('{')).expect("JSON error line");
    serde_json::from_str(line).unwrap()
}

const LINEAR: [&str; 7] = ["explain", "--model", "linear3", "--dist", "single:0,0,0", "--target", "1,1,1"];

fn linear(extra: &[&str]) -> Output {
    let mut args = LINEAR.to_vec();
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn exact_linear_attribution() {
    let v = json_of(&linear(&["--method", "exact"]));
    assert_eq!(phi(&v), vec![-2.0, 1.5, 0.5]);
    assert_eq!(v["provenance"]["model"], "linear3");
}

#[test]
fn full_regression_matches_exact() {
    let v = json_of(&linear(&["--method", "regression"]));
    for (a, b) in phi(&v).iter().zip([-2.0, 1.5, 0.5]) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn small_budget_warns_but_stays_efficient() {
    let out = linear(&["--method", "regression-sampled", "--budget", "4"]);
    let v = json_of(&out);
    let sum: f64 = phi(&v).iter().sum();
    assert!(sum.abs() < 1e-10);
    let warnings = v["warnings"].as_array().unwrap();
    assert!(warnings.iter().any(|w| w.as_str().unwrap().contains("below 2p")));
    assert!(String::from_utf8_lossy(&out.stderr).contains("below 2p"));
}

#[test]
fn anova_partition_route() {
    let v = json_of(&linear(&["--method", "anova-partition", "--n", "50"]));
    for (a, b) in phi(&v).iter().zip([-2.0, 1.5, 0.5]) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn output_round_trips_as_attribution() {
    let v = json_of(&run(&[
        "explain",
        "--model",
        "nonlinear-interaction3",
        "--dist",
        "uniform01",
        "--target",
        "0.2,0.9,0.4",
        "--n",
        "64",
    ]));
    let a: Attribution = serde_json::from_value(v).unwrap();
    a.validate_efficiency(1e-10).unwrap();
}

#[test]
fn runs_are_deterministic_per_seed() {
    let args =
        ["explain", "--model", "nonlinear3", "--dist", "normal", "--target", "1,-1,0.5", "--n", "200", "--seed", "7"];
    assert_eq!(run(&args).stdout, run(&args).stdout);
    let mut other = args.to_vec();
    other[10] = "8";
    assert_ne!(run(&args).stdout, run(&other).stdout);
}

#[test]
fn alias_text_shows_half_patterns() {
    let out = run(&["alias", "--p", "6", "--budget", "12", "--lead", "1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let tail = text.split("alias matrix").nth(1).unwrap();
    let rows: Vec<Vec<&str>> = tail.lines().skip(1).map(|l| l.split_whitespace().collect()).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows[0].iter().all(|c| *c == "1/2"));
    for (i, row) in rows.iter().enumerate().skip(1) {
        for (j, c) in row.iter().enumerate() {
            assert_eq!(*c, if j + 1 == i { "1/2" } else { "0" });
        }
    }
}

#[test]
fn alias_json_full_design_splits_pairs_evenly() {
    let v = json_of(&run(&["alias", "--p", "4", "--design", "full", "--format", "json"]));
    let alias: Vec<Vec<f64>> = serde_json::from_value(v["alias"].clone()).unwrap();
    let expected = [[0.5, 0.5, 0.5], [0.5, 0.0, 0.0], [0.0, 0.5, 0.0]];
    for (row, want) in alias.iter().zip(expected) {
        for (x, w) in row.iter().zip(want) {
            assert!((x - w).abs() < 1e-10, "{alias:?}");
        }
    }
}

#[test]
fn search_ranks_main_effects_before_the_pair() {
    let v = json_of(&run(&["search", "--model", "linear-interaction3", "--dist", "uniform01", "--seed", "1"]));
    let subsets: Vec<Value> =
        v["selected"].as_array().unwrap().iter().map(|t| t["subset"]["features"].clone()).collect();
    assert_eq!(subsets.len(), 4);
    assert_eq!(subsets[0], serde_json::json!([1]));
    assert_eq!(subsets[3], serde_json::json!([2, 3]));
    assert_eq!(v["converged"], true);
}

#[test]
fn search_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let out =
        run(&["search", "--model", "linear-interaction3", "--dist", "uniform01", "--trace", trace.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&trace).unwrap();
    assert!(text.starts_with("order,rank,subset,score"));
}

#[test]
fn sensitivity_reports_indices() {
    let v = json_of(&run(&["sensitivity", "--model", "linear3", "--dist", "uniform01", "--n", "2000"]));
    let s: Vec<f64> = v["indices"]["first_order"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    // linear3 under U(0,1): shares 4 : 2.25 : 0.25
    for (a, b) in s.iter().zip([4.0 / 6.5, 2.25 / 6.5, 0.25 / 6.5]) {
        assert!((a - b).abs() < 0.05, "{s:?}");
    }
    assert_eq!(v["effective_dimension"]["d_s"], 1);
}

#[test]
fn table3_has_sixteen_cells() {
    let v = json_of(&run(&["table3", "--n", "500", "--format", "json"]));
    assert_eq!(v["rows"].as_array().unwrap().len(), 16);
    let text = String::from_utf8(run(&["table3", "--n", "500"]).stdout).unwrap();
    assert!(text.contains("x1"));
}

#[test]
fn output_file_is_written_whole() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("phi.csv");
    let out = linear(&["--format", "csv", "--output", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 4);
    let leftovers = std::fs::read_dir(dir.path()).unwrap().count();
    assert_eq!(leftovers, 1);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"model": "linear3", "dist": {"kind": "single", "point": [0, 0, 0]}, "target": [2, 2, 2], "method": "exact"}"#,
    )
    .unwrap();
    let from_file = json_of(&run(&["explain", "--config", cfg.to_str().unwrap()]));
    assert_eq!(phi(&from_file), vec![-4.0, 3.0, 1.0]);
    let overridden = json_of(&run(&["explain", "--config", cfg.to_str().unwrap(), "--target", "1,1,1"]));
    assert_eq!(phi(&overridden), vec![-2.0, 1.5, 0.5]);
}

#[test]
fn external_command_model() {
    if !Path::new("/bin/sh").exists() {
        return;
    }
    let v = json_of(&run(&[
        "explain",
        "--external",
        "awk -F, '{print 2*$1 - $2}'",
        "--p",
        "2",
        "--dist",
        "single:0,0",
        "--target",
        "1,1",
    ]));
    assert_eq!(phi(&v), vec![2.0, -1.0]);
}

#[test]
fn input_errors_exit_2_with_json() {
    let out = run(&["explain", "--model", "nope", "--dist", "uniform01", "--target", "1,1,1"]);
    assert_eq!(out.status.code(), Some(2));
    let e = error_of(&out);
    assert_eq!(e["error"]["kind"], "input");
    assert_eq!(e["error"]["exit_code"], 2);

    let out = linear(&["--target", "1,1"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["table3", "--format", "csv", "--n", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failing_external_model_exits_4() {
    let out = run(&["explain", "--external", "exit 1", "--p", "2", "--dist", "single:0,0", "--target", "1,1"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_of(&out)["error"]["exit_code"], 4);
}

#[test]
fn worker_count_must_be_positive() {
    let out =
        Command::new(env!("CARGO_BIN_EXE_fanova-shap")).args(LINEAR).env("FANOVA_SHAP_WORKERS", "0").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let ok =
        Command::new(env!("CARGO_BIN_EXE_fanova-shap")).args(LINEAR).env("FANOVA_SHAP_WORKERS", "2").output().unwrap();
    assert!(ok.status.success());
}
