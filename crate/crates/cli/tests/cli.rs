use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cubelap"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(out: &Path, args: &[&str]) -> Output {
    bin().arg("--out").arg(out).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn audit_exit_codes_for_shipped_configs() {
    let dir = tempfile::tempdir().unwrap();
    for (name, expect) in [
        ("diagonal_logistic.cfg", 0),
        ("lotka_volterra.cfg", 2),
        ("coupled_diffusion.cfg", 2),
        ("coupled_transport.cfg", 2),
    ] {
        let out = dir.path().join(name);
        let o = run(&out, &["audit", config(name).to_str().unwrap()]);
        assert_eq!(code(&o), expect, "{name}: {}", String::from_utf8_lossy(&o.stdout));
        let report = read_json(&out.join("audit.json"));
        assert_eq!(report["overall"], Value::Bool(expect == 0));
        let manifest = read_json(&out.join("manifest.json"));
        assert_eq!(manifest["command"], "audit");
        assert!(manifest["config"].is_object());
    }
}

#[test]
fn audit_names_offending_rule() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["--json", "audit", config("coupled_transport.cfg").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    let v = &report["violations"][0];
    assert_eq!(v["rule"], "diag-Gamma");
    assert_eq!(v["site"]["row"], 1);
    assert_eq!(v["site"]["col"], 2);
}

#[test]
fn warnings_only_gives_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("warn.cfg");
    fs::write(
        &cfg,
        r#"{"d": 1, "N": 2, "A": [[1.0, -0.05], [0.0, 1.0]], "Gamma": [[[0.0, 0.0], [0.0, 0.0]]], "reaction": {"kind": "zero"}}"#,
    )
    .unwrap();
    let out = dir.path().join("o");
    let strict = run(&out, &["audit", cfg.to_str().unwrap()]);
    assert_eq!(code(&strict), 2);
    let loose = run(&out, &["--tol", "0.1", "audit", cfg.to_str().unwrap()]);
    assert_eq!(code(&loose), 3);
}

#[test]
fn usage_and_config_errors_give_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &["--no-such-flag", "audit", "x"])), 4);
    assert_eq!(code(&run(dir.path(), &["frobnicate"])), 4);
    assert_eq!(code(&run(dir.path(), &["audit", "/definitely/not/here.cfg"])), 4);

    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "{ \"d\": 1, ").unwrap();
    assert_eq!(code(&run(dir.path(), &["audit", bad.to_str().unwrap()])), 4);

    // A + Aᵀ not positive definite
    fs::write(
        &bad,
        r#"{"d": 1, "N": 1, "A": [[-1.0]], "Gamma": [[[0.0]]], "reaction": {"kind": "zero"}}"#,
    )
    .unwrap();
    let o = run(dir.path(), &["audit", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("positive definite"));

    let o = run(
        dir.path(),
        &["counterexample", "--kind", "diffusion", "--k", "3", "--j", "1", "--components", "2"],
    );
    assert_eq!(code(&o), 4);
}

#[test]
fn help_and_version_exit_cleanly() {
    assert_eq!(code(&bin().arg("--help").output().unwrap()), 0);
    assert_eq!(code(&bin().arg("--version").output().unwrap()), 0);
}

#[test]
fn diffusion_counterexample_scales_like_eps_to_minus_six() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "counterexample", "--kind", "diffusion", "--k", "1", "--j", "2", "--a", "1.0", "--d", "1", "--eps",
            "1,0.5,0.25",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&dir.path().join("violation.json"));
    let slope = report["fitted_slope"].as_f64().unwrap();
    assert!((slope + 6.0).abs() < 1.2, "slope {slope}");
    assert_eq!(report["negativity_observed"], true);
    let csv = fs::read_to_string(dir.path().join("violation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(dir.path().join("violation.gp").exists());
}

#[test]
fn transport_and_reaction_counterexamples_observe_negativity() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["counterexample", "--kind", "transport", "--k", "2", "--j", "1", "--d", "2"]);
    assert_eq!(code(&o), 0);
    let report = read_json(&dir.path().join("violation.json"));
    assert_eq!(report["pinned_component"], 2);
    let slope = report["fitted_slope"].as_f64().unwrap();
    assert!((slope + 1.0).abs() < 0.2, "slope {slope}");

    let o = run(dir.path(), &["counterexample", "--kind", "reaction", "--k", "1", "--j", "2"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn repaired_counterexample_reports_no_negativity() {
    // coupling switched off: the pinned component never leaves zero
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["counterexample", "--kind", "transport", "--k", "1", "--j", "2", "--gamma", "0"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stdout));
    let report = read_json(&dir.path().join("violation.json"));
    assert_eq!(report["negativity_observed"], false);

    // diagonal coupling is not a counterexample at all
    let o = run(dir.path(), &["counterexample", "--kind", "transport", "--k", "1", "--j", "1"]);
    assert_eq!(code(&o), 4);
}

#[test]
fn probe_prints_minus_twenty_seven_in_three_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["--json", "probe", "--kind", "diffusion", "--d", "3", "--eps", "1", "--n", "64"]);
    assert_eq!(code(&o), 0);
    let rows: Value = serde_json::from_slice(&o.stdout).unwrap();
    let v = rows[0]["value"].as_f64().unwrap();
    assert!((v + 27.0).abs() < 0.02 * 27.0, "{v}");
    let o = run(dir.path(), &["probe", "--kind", "diffusion", "--d", "3", "--eps", "1", "--n", "64"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("-26.9"));
}

#[test]
fn unresolvable_probe_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["probe", "--kind", "diffusion", "--d", "1", "--n", "16"]);
    assert_eq!(code(&o), 4);
}

#[test]
fn simulate_writes_series_and_flags_negativity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("diagonal_logistic.cfg");
    let cfg = cfg.to_str().unwrap();

    // constant data never leaves [0, 1] under logistic kinetics
    let flat = dir.path().join("flat");
    let o = run(&flat, &["--t-end", "0.05", "simulate", cfg, "--init", "const:0.5,0.25"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let csv = fs::read_to_string(flat.join("timeseries.csv")).unwrap();
    assert!(csv.starts_with("t,component,min,argmin_index,mass,l2norm\n"));
    let dump = read_json(&flat.join("final_state.json"));
    assert_eq!(dump["N"], 2);
    assert!(flat.join("timeseries.gp").exists());

    // a Gaussian bump dips below zero under Δ³ diffusion
    let bump = dir.path().join("bump");
    let o = run(&bump, &["--t-end", "0.05", "simulate", cfg]);
    assert_eq!(code(&o), 2);
    let summary = read_json(&bump.join("summary.json"));
    assert_eq!(summary["negativity_certificate"], true);

    // restart from the dump
    let resumed = dir.path().join("resumed");
    let state = flat.join("final_state.json");
    let o = run(&resumed, &["--t-end", "0.01", "simulate", cfg, "--init", state.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
}

#[test]
fn simulate_blow_up_is_runtime_error_with_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("blow.cfg");
    // u' = u³ from a positive constant blows up at t = 1/(2·2²) = 0.125
    fs::write(
        &cfg,
        r#"{"d": 1, "N": 1, "A": [[1.0]], "Gamma": [[[0.0]]],
            "reaction": {"kind": "polynomial", "terms": [[{"coeff": -1.0, "exponents": [3]}]]},
            "grid": {"n": 16, "box": 6.283185307179586}}"#,
    )
    .unwrap();
    let out = dir.path().join("o");
    let o = run(&out, &["--t-end", "0.2", "--dt", "1e-4", "simulate", cfg.to_str().unwrap(), "--init", "const:2"]);
    assert_eq!(code(&o), 5, "{}", String::from_utf8_lossy(&o.stdout));
    let summary = read_json(&out.join("summary.json"));
    let t = summary["blow_up"]["t"].as_f64().unwrap();
    assert!((t - 0.125).abs() < 0.01, "{t}");
}

#[test]
fn ode_check_agrees_and_flags_negative_kinetics() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["ode-check", config("diagonal_logistic.cfg").to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let cmp = read_json(&dir.path().join("ode_check.json"));
    assert!(cmp["max_deviation"].as_f64().unwrap() < 1e-8);

    let o = run(
        dir.path(),
        &["ode-check", config("lotka_volterra.cfg").to_str().unwrap(), "--u0", "0.5,0"],
    );
    assert_eq!(code(&o), 2);
    let cmp = read_json(&dir.path().join("ode_check.json"));
    assert!(cmp["pde_first_negative"][1].is_number());
    assert!(cmp["ode_first_negative"][1].is_number());

    let o = run(dir.path(), &["ode-check", config("lotka_volterra.cfg").to_str().unwrap(), "--u0", "1"]);
    assert_eq!(code(&o), 4);
}

#[test]
fn outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("lotka_volterra.cfg");
    let args = ["--seed", "17", "audit", cfg.to_str().unwrap()];
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run(&a, &args);
    run(&b, &args);
    assert_eq!(fs::read(a.join("audit.json")).unwrap(), fs::read(b.join("audit.json")).unwrap());
    let manifest = read_json(&a.join("manifest.json"));
    assert_eq!(manifest["seed"], 17);
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));

    let other = dir.path().join("c");
    run(&other, &["--seed", "18", "audit", cfg.to_str().unwrap()]);
    assert_ne!(fs::read(a.join("audit.json")).unwrap(), fs::read(other.join("audit.json")).unwrap());

    let args = ["counterexample", "--kind", "diffusion", "--k", "1", "--j", "2", "--d", "2"];
    run(&a, &args);
    run(&b, &args);
    assert_eq!(
        fs::read(a.join("violation.json")).unwrap(),
        fs::read(b.join("violation.json")).unwrap()
    );
}
