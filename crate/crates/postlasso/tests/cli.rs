//! End-to-end tests of the `postlasso` binary: exit codes, JSON outputs
//! validating against the shipped schemas, config echoes, and seed
//! determinism.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_postlasso")
}

fn work_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("postlasso_cli_{tag}_{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).expect("mkdir");
    dir
}

/// Writes a deterministic (n, p) fixture with a couple of strong signals.
fn write_fixture(dir: &Path, n: usize, p: usize, seed: u64) -> (PathBuf, PathBuf) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut beta = DVector::zeros(p);
    beta[0] = 1.1;
    beta[2.min(p - 1)] = -0.8;
    let y = &x * &beta + DVector::from_fn(n, |_, _| 0.5 * rng.sample::<f64, _>(StandardNormal));
    let x_path = dir.join("X.csv");
    let y_path = dir.join("y.csv");
    let rows: Vec<String> = (0..n)
        .map(|i| {
            (0..p)
                .map(|j| format!("{:.12}", x[(i, j)]))
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect();
    std::fs::write(&x_path, rows.join("\n")).unwrap();
    let yt: Vec<String> = (0..n).map(|i| format!("{:.12}", y[i])).collect();
    std::fs::write(&y_path, yt.join("\n")).unwrap();
    (x_path, y_path)
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("spawn postlasso")
}

fn parse_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

fn schema(name: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("schemas")
        .join(name);
    serde_json::from_str(&std::fs::read_to_string(path).expect("schema file")).expect("schema json")
}

/// Minimal JSON-schema checker covering the subset the shipped schemas use:
/// type, required, properties, items, enum, additionalProperties.
fn check_schema(schema: &Value, value: &Value, at: &str, errors: &mut Vec<String>) {
    if let Some(types) = schema.get("type") {
        let names: Vec<String> = match types {
            Value::String(s) => vec![s.clone()],
            Value::Array(a) => a
                .iter()
                .filter_map(|v| v.as_str().map(String::from))
                .collect(),
            _ => vec![],
        };
        let actual = match value {
            Value::Null => "null",
            Value::Bool(_) => "boolean",
            Value::Number(n) => {
                if n.is_i64() || n.is_u64() {
                    "integer"
                } else {
                    "number"
                }
            }
            Value::String(_) => "string",
            Value::Array(_) => "array",
            Value::Object(_) => "object",
        };
        let ok = names
            .iter()
            .any(|t| t == actual || (t == "number" && actual == "integer"));
        if !ok {
            errors.push(format!("{at}: expected type {names:?}, got {actual}"));
            return;
        }
    }
    if let Some(allowed) = schema.get("enum").and_then(Value::as_array) {
        if !allowed.contains(value) {
            errors.push(format!("{at}: {value} not in enum {allowed:?}"));
        }
    }
    if let Value::Object(map) = value {
        if let Some(required) = schema.get("required").and_then(Value::as_array) {
            for key in required.iter().filter_map(Value::as_str) {
                if !map.contains_key(key) {
                    errors.push(format!("{at}: missing required key \"{key}\""));
                }
            }
        }
        if let Some(props) = schema.get("properties").and_then(Value::as_object) {
            for (key, sub) in props {
                if let Some(v) = map.get(key) {
                    check_schema(sub, v, &format!("{at}.{key}"), errors);
                }
            }
        }
        if let Some(extra) = schema.get("additionalProperties") {
            if extra.is_object() {
                let props = schema
                    .get("properties")
                    .and_then(Value::as_object)
                    .map(|m| m.keys().cloned().collect::<Vec<_>>())
                    .unwrap_or_default();
                for (key, v) in map {
                    if !props.contains(key) {
                        check_schema(extra, v, &format!("{at}.{key}"), errors);
                    }
                }
            }
        }
    }
    if let (Value::Array(items), Some(sub)) = (value, schema.get("items")) {
        for (i, v) in items.iter().enumerate() {
            check_schema(sub, v, &format!("{at}[{i}]"), errors);
        }
    }
}

fn assert_schema(name: &str, value: &Value) {
    let mut errors = Vec::new();
    check_schema(&schema(name), value, "$", &mut errors);
    assert!(errors.is_empty(), "schema {name} violations: {errors:#?}");
}

#[test]
fn fit_emits_schema_valid_json_with_config_echo() {
    let dir = work_dir("fit");
    let (x, y) = write_fixture(&dir, 14, 28, 1);
    let out = run(&[
        "fit",
        "--x",
        x.to_str().unwrap(),
        "--y",
        y.to_str().unwrap(),
        "--lambda",
        "0.2",
    ]);
    assert!(out.status.success());
    let v = parse_stdout(&out);
    assert_schema("fit.schema.json", &v);
    assert_eq!(v["config"]["lambda_rule"], "fixed");
    assert!(v["fit"]["kkt_residual"].as_f64().unwrap() <= 1e-8);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn ragged_csv_is_a_parse_error_with_exit_2() {
    let dir = work_dir("ragged");
    let (_, y) = write_fixture(&dir, 8, 6, 2);
    let bad = dir.join("bad.csv");
    std::fs::write(&bad, "1.0,2.0,3.0\n4.0,5.0\n6.0,7.0,8.0").unwrap();
    let out = run(&[
        "fit",
        "--x",
        bad.to_str().unwrap(),
        "--y",
        y.to_str().unwrap(),
        "--lambda",
        "0.2",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("error: code=2"), "stderr: {stderr}");
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn missing_penalty_choice_is_exit_2_and_unknown_flag_is_rejected() {
    let dir = work_dir("flags");
    let (x, y) = write_fixture(&dir, 10, 20, 3);
    let out = run(&[
        "fit",
        "--x",
        x.to_str().unwrap(),
        "--y",
        y.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&[
        "fit",
        "--x",
        x.to_str().unwrap(),
        "--y",
        y.to_str().unwrap(),
        "--lambda",
        "0.2",
        "--bogus",
    ]);
    assert_eq!(out.status.code(), Some(2), "clap rejects unknown flags");
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn empty_model_is_exit_4() {
    let dir = work_dir("empty");
    let (x, y) = write_fixture(&dir, 12, 24, 4);
    let out = run(&[
        "infer",
        "--x",
        x.to_str().unwrap(),
        "--y",
        y.to_str().unwrap(),
        "--lambda",
        "1e6",
        "--sigma2",
        "0.25",
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(4));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn insufficient_draws_is_exit_5() {
    let dir = work_dir("fewdraws");
    let (x, y) = write_fixture(&dir, 12, 24, 5);
    let out = run(&[
        "infer",
        "--x",
        x.to_str().unwrap(),
        "--y",
        y.to_str().unwrap(),
        "--lambda",
        "0.2",
        "--sigma2",
        "0.25",
        "--k",
        "1",
        "--n",
        "50",
        "--burn-in",
        "50",
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(5));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn oracle_budget_exhaustion_is_exit_6_with_partial_report() {
    let dir = work_dir("budget");
    let (x, y) = write_fixture(&dir, 12, 24, 6);
    let out = run(&[
        "oracle",
        "--x",
        x.to_str().unwrap(),
        "--y",
        y.to_str().unwrap(),
        "--lambda",
        "0.2",
        "--sigma2",
        "0.25",
        "--n-accept",
        "100000",
        "--max-draws",
        "50",
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(6));
    let v = parse_stdout(&out);
    assert_schema("oracle.schema.json", &v);
    assert_eq!(v["partial"], Value::Bool(true));
    assert_eq!(v["proposed"], 50);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn oracle_comparison_validates_and_reports_ks() {
    let dir = work_dir("oracle");
    let (x, y) = write_fixture(&dir, 5, 10, 7);
    let out = run(&[
        "oracle",
        "--x",
        x.to_str().unwrap(),
        "--y",
        y.to_str().unwrap(),
        "--lambda",
        "0.45",
        "--sigma2",
        "1.0",
        "--n-accept",
        "400",
        "--max-draws",
        "400000",
        "--compare-mcmc",
        "--mcmc-draws",
        "800",
        "--seed",
        "9",
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = parse_stdout(&out);
    assert_schema("oracle.schema.json", &v);
    assert!(v["comparison"]["max_ks"].as_f64().unwrap() < 0.5);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn sample_emits_draws_and_chain_diagnostics() {
    let dir = work_dir("sample");
    let (x, y) = write_fixture(&dir, 12, 24, 8);
    let out = run(&[
        "sample",
        "--x",
        x.to_str().unwrap(),
        "--y",
        y.to_str().unwrap(),
        "--lambda",
        "0.25",
        "--sigma2",
        "0.25",
        "--n-draws",
        "150",
        "--burn-in",
        "100",
        "--seed",
        "3",
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = parse_stdout(&out);
    assert_schema("sample.schema.json", &v);
    assert_eq!(v["draws"]["nu_star"].as_array().unwrap().len(), 150);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn infer_is_seed_deterministic_and_schema_valid() {
    let dir = work_dir("infer");
    let (x, y) = write_fixture(&dir, 16, 32, 9);
    let args = [
        "infer",
        "--x",
        x.to_str().unwrap(),
        "--y",
        y.to_str().unwrap(),
        "--lambda",
        "0.22",
        "--sigma2",
        "0.25",
        "--alpha",
        "0.05",
        "--k",
        "4",
        "--n",
        "100",
        "--burn-in",
        "150",
        "--variant",
        "randomized",
        "--variant",
        "conservative",
        "--variant",
        "plugin",
        "--joint",
        "--pairs",
        "--delta",
        "inf",
        "--seed",
        "27",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(
        a.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&a.stderr)
    );
    assert_eq!(
        a.stdout, b.stdout,
        "same seed must give byte-identical JSON"
    );
    let v = parse_stdout(&a);
    assert_schema("infer.schema.json", &v);
    // Joint cube: diameter = 2 r sqrt(m), and every bound finite.
    let sets = v["sets"].as_array().unwrap();
    let joint = sets
        .iter()
        .find(|s| s["family"] == "joint")
        .expect("joint set");
    let r = joint["radius"].as_f64().unwrap();
    let m = joint["m"].as_u64().unwrap() as f64;
    let d = joint["diameter"].as_f64().unwrap();
    assert!((d - 2.0 * r * m.sqrt()).abs() < 1e-12);
    for iv in v["intervals"].as_array().unwrap() {
        assert!(iv["lower"].as_f64().unwrap().is_finite());
        assert!(iv["upper"].as_f64().unwrap().is_finite());
    }
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn simulate_writes_report_and_resume_reproduces_bytes() {
    let dir = work_dir("simulate");
    let cfg = dir.join("exp.toml");
    std::fs::write(
        &cfg,
        r#"
mode = "intervals"
design = "identity"
n = 20
p = 30
a0_size = 3
replicates = 2
seed = 5
lambda = { grid_index = 8 }
variants = ["randomized"]
k_boundary = 3
n_keep = 60
burn_in = 100
"#,
    )
    .unwrap();
    let out_dir = dir.join("run");
    let a = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        a.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&a.stderr)
    );
    let v = parse_stdout(&a);
    assert_schema("report.schema.json", &v);
    let records = std::fs::read(out_dir.join("records.csv")).unwrap();
    assert!(!records.is_empty());
    // Resume path must reproduce the identical bytes.
    let b = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--resume",
    ]);
    assert!(b.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(records, std::fs::read(out_dir.join("records.csv")).unwrap());
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn invalid_config_key_is_exit_2_with_location() {
    let dir = work_dir("badcfg");
    let cfg = dir.join("exp.toml");
    std::fs::write(
        &cfg,
        "mode = \"intervals\"\ndesign = \"identity\"\nn = 1\np = 10\nreplicates = 1\nseed = 0\n",
    )
    .unwrap();
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("n:"),
        "message names the offending key: {stderr}"
    );
    let _ = std::fs::remove_dir_all(&dir);
}
