use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_netbell"));
    c.env_remove("NETBELL_TOL");
    c
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: Value = serde_json::from_slice(&out.stdout).expect("valid JSON");
    assert!(v["tool_version"].is_string());
    assert!(v["provenance_labels"].is_object());
    v
}

fn f(v: &Value) -> f64 {
    v.as_f64().expect("number")
}

#[test]
fn eval_quantum_defaults() {
    let v = run_json(&["eval-quantum", "--n", "2"]);
    let r = &v["results"]["inequality"];
    assert!((f(&r["aggregate_s"]) - std::f64::consts::SQRT_2).abs() < 1e-9);
    assert_eq!(r["violation"], true);
    assert_eq!(v["results"]["no_signaling"]["passed"], true);
    assert_eq!(v["provenance_labels"]["inequality.md_bound"], "paper-closed-form");

    let v = run_json(&["eval-quantum", "--n", "3"]);
    assert!((f(&v["results"]["inequality"]["aggregate_s"]) - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-9);

    let v = run_json(&["eval-quantum", "--n", "4"]);
    assert_eq!(v["provenance_labels"]["inequality.md_bound"], "derived");
}

#[test]
fn eval_quantum_with_setup_files() {
    let path = fixture("product_states.json");
    let v = run_json(&["eval-quantum", "--n", "2", "--setup", path.to_str().unwrap()]);
    let r = &v["results"]["inequality"];
    assert!(f(&r["aggregate_s"]) <= 1.0);
    assert_eq!(r["violation"], false);

    let path = fixture("explicit_bell_setup.json");
    let v = run_json(&["eval-quantum", "--n", "2", "--setup", path.to_str().unwrap(), "--emit-behavior"]);
    assert!((f(&v["results"]["inequality"]["aggregate_s"]) - 2f64.sqrt()).abs() < 1e-9);
    assert_eq!(v["results"]["behavior"]["records"].as_array().unwrap().len(), 64);
}

#[test]
fn malformed_inputs_exit_2() {
    let path = fixture("unnormalized_setup.json");
    let out = run(&["eval-quantum", "--n", "2", "--setup", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("norm"));

    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.json");
    std::fs::write(&junk, "{ not json").unwrap();
    let out = run(&["eval-quantum", "--n", "2", "--setup", junk.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["eval-model", junk.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let path = fixture("bad_distribution_model.json");
    let out = run(&["eval-model", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["eval-quantum", "--n", "2", "--setup", "/nonexistent/setup.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(run(&["bound", "--n", "1", "--m", "0"]).status.code(), Some(2));
    assert_eq!(run(&["required-md", "--n", "2", "--s", "2.5"]).status.code(), Some(2));
    assert_eq!(run(&["curve", "--n-max", "7"]).status.code(), Some(2));
    assert_eq!(run(&["eval-model"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn resource_guards_exit_3() {
    assert_eq!(run(&["search", "--n", "4"]).status.code(), Some(3));
    assert_eq!(run(&["search", "--n", "2", "--grid", "1000"]).status.code(), Some(3));
    assert_eq!(run(&["search", "--n", "2", "--lambda-size", "3"]).status.code(), Some(3));
}

#[test]
fn bounds_and_thresholds() {
    let v = run_json(&["bound", "--n", "2", "--m", "0"]);
    assert_eq!(f(&v["results"]["bound"]), 1.0);
    let v = run_json(&["bound", "--n", "3", "--m", "0.142136"]);
    assert!((f(&v["results"]["bound"]) - 2.828427).abs() < 1e-6);
    assert_eq!(v["provenance_labels"]["bound"], "paper-closed-form");
    let v = run_json(&["bound", "--n", "5", "--m", "0.5"]);
    assert_eq!(v["provenance_labels"]["bound"], "derived");
    let v = run_json(&["required-md", "--n", "2", "--s", "1.414214"]);
    assert!((f(&v["results"]["m1"]) - 0.343146).abs() < 1e-6);
}

#[test]
fn curve_csv() {
    let out = run(&["curve"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# trend-flag"));
    assert_eq!(lines.next().unwrap(), "n,m1_required,md_percent,f_percent,provenance");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.len() == 5));
    assert_eq!(rows[0][2], "17.16");
    assert_eq!(rows[0][3], "82.84");
    assert_eq!(rows[1][3], "92.89");
    let m4: f64 = rows[2][1].parse().unwrap();
    assert!((m4 - 0.05887).abs() < 1e-5);
    assert_eq!(rows[2][4], "derived");

    let out = run(&["curve", "--n-max", "3"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 4);
}

#[test]
fn search_command() {
    let v = run_json(&["search", "--n", "2", "--m", "0"]);
    assert!((f(&v["results"]["best_s"]) - 1.0).abs() < 1e-9);
    assert_eq!(v["provenance_labels"]["best_s"], "search");
    let model = v["results"]["best_model"].to_string();
    netbell::MDLhvModel::from_json_str(&model).unwrap();

    let v = run_json(&["search", "--n", "2", "--m", "1", "--grid", "50", "--allow-signaling"]);
    assert!((f(&v["results"]["best_s"]) - 1.5f64.sqrt()).abs() < 1e-6);
    assert!(f(&v["results"]["gap"]) >= -1e-9);

    let v = run_json(&["search", "--n", "3", "--m", "2", "--grid", "50"]);
    assert!(f(&v["results"]["best_s"]) <= f(&v["results"]["md_bound"]) + 1e-9);
    assert_eq!(v["results"]["no_signaling"], true);
}

#[test]
fn eval_model_selector_tables() {
    let v = run_json(&["eval-model", "--paper-bilocal", "--p", "1"]);
    let r = &v["results"];
    assert_eq!(r["reading"], "search-fallback");
    let m1 = f(&r["md"]["m"][0]);
    assert!((m1 - 2.0).abs() < 1e-12);
    assert!((f(&r["md"]["f"][0]) - (1.0 - m1 / 2.0)).abs() < 1e-15);
    assert_eq!(r["no_signaling"]["passed"], true);
    assert!(r["contract"]["literal"]["met"].is_boolean());

    let v = run_json(&["eval-model", "--paper-star", "--p", "0.0710678"]);
    assert!((f(&v["results"]["md"]["f"][0]) - 0.9289322).abs() < 1e-6);

    let path = fixture("bilocal_table_p0.5.json");
    let v = run_json(&["eval-model", path.to_str().unwrap()]);
    assert!((f(&v["results"]["md"]["m"][0]) - 1.0).abs() < 1e-12);
    assert!(v["results"]["reading"].is_null());

    let v = run_json(&["eval-model", "--paper-bilocal", "--p", "0.5", "--literal", "--a", "-1", "--b", "1"]);
    assert_eq!(v["results"]["reading"], "table-literal");
    assert_eq!(run(&["eval-model", "--paper-bilocal", "--a", "-1"]).status.code(), Some(2));
}

#[test]
fn fixtures_match_generator() {
    for (flag, p, file) in [
        ("--paper-bilocal", "0.25", "bilocal_table_p0.25.json"),
        ("--paper-bilocal", "0.5", "bilocal_table_p0.5.json"),
        ("--paper-star", "0.25", "star_table_p0.25.json"),
        ("--paper-star", "0.5", "star_table_p0.5.json"),
    ] {
        let v = run_json(&["model", flag, "--p", p, "--literal"]);
        let shipped: Value =
            serde_json::from_str(&std::fs::read_to_string(fixture(file)).unwrap()).unwrap();
        assert_eq!(v["results"]["model"], shipped, "{file}");
    }
}

#[test]
fn tolerance_from_environment() {
    let out = bin()
        .args(["eval-quantum", "--n", "2"])
        .env("NETBELL_TOL", "0.5")
        .output()
        .unwrap();
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["results"]["inequality"]["violation"], false);
    assert_eq!(f(&v["config"]["tol"]), 0.5);

    let out = bin().args(["bound", "--n", "2", "--m", "0"]).env("NETBELL_TOL", "abc").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["bound", "--n", "2", "--m", "0"]).env("NETBELL_TOL", "-1").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
