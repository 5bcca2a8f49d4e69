use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ciwnls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ciwnls"))
        .args(args)
        .env_remove("CIWNLS_OUT_DIR")
        .output()
        .unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

const SMALL_CONFIG: &str = r#"{
  "graph": {"kind": "explicit", "n_agents": 3, "edges": [[1, 2], [2, 3]]},
  "model": {"type": "pairwise_sine", "pairs": [[1, 2], [2, 3], [1, 3]], "variance": 0.5, "param_dim": 3},
  "feasible_set": {"kind": "box", "lower": [-1, -1, -1], "upper": [1, 1, 1]},
  "theta_true": [0.2, -0.3, 0.1],
  "schedule": {"a": 4.0, "b": 1.0, "delta1": 0.25},
  "horizon": 200,
  "trials": 6,
  "master_seed": 11,
  "run_centralized": true,
  "centralized_checkpoints": 4
}"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn graph_gen_two_close_agents() {
    let out = ciwnls(&["graph-gen", "--n", "2", "--radius", "1.5"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let g = json(&out);
    assert_eq!(g["n_agents"], 2);
    assert_eq!(g["edges"], serde_json::json!([[1, 2]]));
    // replayable
    assert_eq!(out.stdout, ciwnls(&["graph-gen", "--n", "2", "--radius", "1.5"]).stdout);
}

#[test]
fn graph_gen_to_file_and_failure_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.json");
    let out = ciwnls(&["graph-gen", "--n", "10", "--radius", "0.4", "--seed", "3", "--out", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(out.stdout.is_empty());
    assert!(fs::read_to_string(&path).unwrap().contains("\"n_agents\": 10"));
    let out = ciwnls(&["graph-gen", "--n", "30", "--radius", "0.01"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("--radius"));
}

#[test]
fn covariance_on_benchmark() {
    let out = ciwnls(&["covariance", "--benchmark"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let r = json(&out);
    let tc = r["trace_sigma_c"].as_f64().unwrap();
    assert!((tc - 4.7200).abs() < 1e-3, "{tc}");
    assert!(r["trace_sigma_d"].as_f64().unwrap() > tc);
    assert_eq!(r["n_agents"], 10);
}

#[test]
fn covariance_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "m.json", r#"{"type": "linear", "F": [[[2.0]]], "R": [[[1.0]]]}"#);
    let out = ciwnls(&["covariance", "--model", &model, "--theta", "0.5", "--a", "1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let r = json(&out);
    // Γ = 4, Σ_c = 1/4, Σ_d = 1/2 + 1/(4·(4 − 1/2))
    assert_eq!(r["trace_sigma_c"].as_f64().unwrap(), 0.25);
    assert!((r["trace_sigma_d"].as_f64().unwrap() - (0.5 + 1.0 / 14.0)).abs() < 1e-15);

    let infeasible = ciwnls(&["covariance", "--model", &model, "--theta", "0.5", "--a", "0.1"]);
    assert_eq!(infeasible.status.code(), Some(2));
    let wrong_dim = ciwnls(&["covariance", "--model", &model, "--theta", "0.5,1"]);
    assert_eq!(wrong_dim.status.code(), Some(1));
    assert!(stderr(&wrong_dim).contains("--theta"));
    let set = write(dir.path(), "s.json", r#"{"kind": "box", "lower": [0], "upper": [0.4]}"#);
    let outside = ciwnls(&["covariance", "--model", &model, "--set", &set, "--theta", "0.5"]);
    assert_eq!(outside.status.code(), Some(1));
}

#[test]
fn validation_errors_name_the_culprit() {
    let out = ciwnls(&["simulate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--config"));
    assert!(stderr(&out).contains("Usage"));

    let out = ciwnls(&["simulate", "--config", "/no/such/file.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("/no/such/file.json"));

    let out = ciwnls(&["covariance", "--benchmark", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));

    let out = ciwnls(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"graph": 3}"#);
    let out = ciwnls(&["simulate", "--config", &bad]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("bad.json"));
}

#[test]
fn audit_prints_table_and_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "m.json", r#"{"type": "linear", "F": [[[1.0, 0.0]], [[0.0, 1.0]]], "R": [[[1.0]], [[2.0]]]}"#);
    let set = write(dir.path(), "s.json", r#"{"kind": "box", "lower": [-1, -1], "upper": [1, 1]}"#);
    let report = dir.path().join("audit.json");
    let args = ["audit", "--model", &model, "--set", &set, "--samples", "500", "--out", report.to_str().unwrap()];
    let out = ciwnls(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    let table = String::from_utf8(out.stdout).unwrap();
    for id in ["M2", "M3", "M6", "M7"] {
        assert!(table.contains(id), "{table}");
    }
    let first = fs::read(&report).unwrap();
    assert!(ciwnls(&args).status.success());
    assert_eq!(first, fs::read(&report).unwrap());

    let whole = write(dir.path(), "w.json", r#"{"kind": "whole_space"}"#);
    let out = ciwnls(&["audit", "--model", &model, "--set", &whole]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--set"));
}

#[test]
fn simulate_writes_replayable_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "c.json", SMALL_CONFIG);
    let run = |name: &str, jobs: &str| {
        let out_dir = dir.path().join(name);
        let out = ciwnls(&["--quiet", "--jobs", jobs, "simulate", "--config", &config, "--out-dir", out_dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", stderr(&out));
        assert!(out.stderr.is_empty(), "--quiet leaks: {}", stderr(&out));
        out_dir
    };
    let a = run("a", "1");
    let b = run("b", "2");
    for f in ["metrics.csv", "covariance.json", "audit.json", "config.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let csv = fs::read_to_string(a.join("metrics.csv")).unwrap();
    assert!(csv.starts_with("epoch,agent,mean_norm_error,mean_scaled_sq_error,centralized_scaled_sq_error\n"));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["trials"], 6);
    assert_eq!(manifest["failed_trials"], 0);

    let out_dir = dir.path().join("c");
    let out = ciwnls(&["simulate", "--config", &config, "--trials", "2", "--horizon", "50", "--no-audit", "--out-dir", out_dir.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stderr(&out).contains("trials 2/2"));
    assert!(!out_dir.join("audit.json").exists());
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["horizon"], 50);
}

#[test]
fn out_dir_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "c.json", SMALL_CONFIG);
    let target = dir.path().join("from-env");
    let out = Command::new(env!("CARGO_BIN_EXE_ciwnls"))
        .args(["--quiet", "simulate", "--config", &config, "--trials", "1", "--no-audit"])
        .env("CIWNLS_OUT_DIR", &target)
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(target.join("metrics.csv").exists());
}

#[test]
fn reproduce_paper_small_override() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("bench");
    let out = ciwnls(&[
        "--quiet", "reproduce-paper", "--trials", "2", "--horizon", "100", "--no-audit",
        "--out-dir", out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let config: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("config.json")).unwrap()).unwrap();
    assert_eq!(config["trials"], 2);
    assert_eq!(config["graph"]["radius"], 0.4);
    let rows = fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    assert!(rows.lines().skip(1).all(|l| l.split(',').count() == 5));
}
