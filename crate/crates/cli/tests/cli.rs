use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let p = dir.join("run.json");
    std::fs::write(&p, body).unwrap();
    p
}

fn config(alpha: f64, beta: f64, cells: usize, extra: &str) -> String {
    format!(
        r#"{{
  "schema_version": 1,
  "seed": 7,
  "problem": {{
    "alpha": {alpha},
    "beta": {beta},
    "curve": {{ "kind": "linear", "l": 0.75 }},
    "q": {{ "kind": "builtin", "name": "q_default" }},
    "forcing": {{ "kind": "builtin", "name": "lib_sin_mix" }},
    "grid": {{ "cells": {cells} }}
  }}{extra}
}}"#
    )
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixedsolve")).args(args).env("MIXEDSOLVE_THREADS", "1").output().unwrap()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

/// Every file in the directory other than the manifest is listed in it.
fn assert_no_orphans(dir: &Path) {
    let m = manifest(dir);
    let listed: Vec<String> =
        m["outputs"].as_array().unwrap().iter().map(|o| o["path"].as_str().unwrap().to_string()).collect();
    for e in std::fs::read_dir(dir).unwrap() {
        let name = e.unwrap().file_name().into_string().unwrap();
        assert!(name == "manifest.json" || listed.contains(&name), "orphan {name}");
    }
    for l in &listed {
        assert!(dir.join(l).exists(), "missing {l}");
    }
}

#[test]
fn solve_writes_grids_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &config(1.0, 0.0, 64, ""));
    let out = tmp.path().join("out");
    let o = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["omega0.csv", "omega1.csv", "traces.csv", "lambda.csv", "residuals.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let head = std::fs::read_to_string(out.join("omega1.csv")).unwrap();
    assert!(head.starts_with("x,y,u,region\n") && head.contains("hyperbolic"));
    let m = manifest(&out);
    assert_eq!(m["command"], "solve");
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    assert!(m["timings"].as_array().unwrap().len() >= 3);
    assert_no_orphans(&out);
}

#[test]
fn outputs_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &config(0.0, 1.0, 32, ""));
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let o = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", d.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    for f in ["omega0.csv", "omega1.csv", "traces.csv", "residual_gluing.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn verify_reports_fitted_orders() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &config(1.0, 0.0, 64, ""));
    let out = tmp.path().join("out");
    let o =
        run(&["verify", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--grids", "128,256,512"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let study: Value = serde_json::from_str(&std::fs::read_to_string(out.join("convergence.json")).unwrap()).unwrap();
    assert_eq!(study["grids"], serde_json::json!([128, 256, 512]));
    let fits = study["fits"].as_array().unwrap();
    assert_eq!(fits.len(), 6);
    assert!(fits.iter().any(|f| f["name"] == "gluing" && f["order"].as_f64().unwrap() > 1.0));
    assert_no_orphans(&out);
}

#[test]
fn zero_parameters_exit_with_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &config(0.0, 0.0, 32, ""));
    let o = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpha^2 + beta^2 > 0"));
}

#[test]
fn unknown_key_is_reported_with_location() {
    let tmp = tempfile::tempdir().unwrap();
    let body = config(1.0, 0.0, 32, "").replace("\"seed\"", "\"sede\"");
    let cfg = write_config(tmp.path(), &body);
    let o = run(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("sede") && err.contains("line 3"), "{err}");
}

#[test]
fn failing_check_exits_one_and_names_it() {
    let tmp = tempfile::tempdir().unwrap();
    let extra = r#", "spectral": { "max_residual": 0.0, "lambdas": [[1.0, 0.0]], "kernel_cells": 16, "n4": 4 }"#;
    let cfg = write_config(tmp.path(), &config(1.0, 0.0, 32, extra));
    let out = tmp.path().join("out");
    let o = run(&["spectral", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("spectral_1_0"));
    assert_eq!(manifest(&out)["checks"][0]["passed"], false);
}

#[test]
fn spectral_lambda_override() {
    let tmp = tempfile::tempdir().unwrap();
    let extra = r#", "spectral": { "kernel_cells": 16, "n4": 6 }"#;
    let cfg = write_config(tmp.path(), &config(2.0, 1.0, 32, extra));
    let out = tmp.path().join("out");
    let o = run(&["spectral", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--lambda", "-50,3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s: Value = serde_json::from_str(&std::fs::read_to_string(out.join("spectral.json")).unwrap()).unwrap();
    assert_eq!(s[0]["lambda"], serde_json::json!([-50.0, 3.0]));
    assert_no_orphans(&out);
}

#[test]
fn analyze_with_seeded_random_forcings() {
    let tmp = tempfile::tempdir().unwrap();
    let extra = r#", "analyze": { "kernel_cells": 32, "n4": 6, "apriori_grids": [32, 64], "random_forcings": 2 }"#;
    let cfg = write_config(tmp.path(), &config(1.0, 0.0, 32, extra));
    let out = tmp.path().join("out");
    let o = run(&["analyze", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let csv = std::fs::read_to_string(out.join("apriori.csv")).unwrap();
    assert!(csv.contains("random_1,64,"));
    assert_no_orphans(&out);
}

#[test]
fn converge_on_manufactured_solution() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &config(0.0, 1.0, 32, ""));
    let out = tmp.path().join("out");
    let o =
        run(&["converge", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--grids", "32,64,128"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let csv = std::fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert!(csv.contains("solution_error,128,"));
}

#[test]
fn mismatched_command_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let body = config(1.0, 0.0, 32, "").replacen("\"seed\": 7,", "\"seed\": 7, \"command\": \"verify\",", 1);
    let cfg = write_config(tmp.path(), &body);
    let o = run(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
