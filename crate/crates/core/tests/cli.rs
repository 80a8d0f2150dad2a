//! End-to-end runs of the `steinlab` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use steinlab::cli::{manifest_path, RunManifest};
use steinlab::divergences::relative_entropy;
use steinlab::linalg::{c, CMat, HermOperator};
use steinlab::states::{max_entangled, DensityMatrix};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_steinlab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env("STEINLAB_THREADS", "1").output().expect("binary runs")
}

fn write_state(dir: &Path, name: &str, rho: &DensityMatrix) -> PathBuf {
    let p = dir.join(name);
    rho.write_json(&p).unwrap();
    p
}

fn qubit_pair() -> (DensityMatrix, DensityMatrix) {
    let rho = DensityMatrix::from_diag(&[0.8, 0.2]).unwrap();
    let (s, co) = 0.4f64.sin_cos();
    let r = CMat::from_fn(2, 2, |i, j| match (i, j) {
        (0, 0) | (1, 1) => c(co, 0.0),
        (0, 1) => c(-s, 0.0),
        _ => c(s, 0.0),
    });
    let sigma = DensityMatrix::assume_valid(HermOperator::from_real_diag(&[0.3, 0.7]).conjugate_by(&r));
    (rho, sigma)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn divergence_of_state_with_itself_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let (rho, _) = qubit_pair();
    let r = write_state(dir.path(), "r.json", &rho);
    let out = dir.path().join("div.json");
    let o = run(&["divergence", "--rho", s(&r), "--sigma", s(&r), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(v["relative_entropy"].as_f64().unwrap().abs() < 1e-12);
    let m = RunManifest::read(&manifest_path(&out)).unwrap();
    assert_eq!(m.subcommand, "divergence");
    assert_eq!(m.input_hashes.len(), 1);
    let again: RunManifest = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
    assert_eq!(again, m);
}

#[test]
fn stein_curve_approaches_relative_entropy() {
    let dir = tempfile::tempdir().unwrap();
    let (rho, sigma) = qubit_pair();
    let reference = relative_entropy(&rho, &sigma).unwrap().value;
    let r = write_state(dir.path(), "rho.json", &rho);
    let q = write_state(dir.path(), "sigma.json", &sigma);
    let out = dir.path().join("curve.csv");
    let o = run(&["stein-curve", "--rho", s(&r), "--sigma", s(&q), "--eps", "0.05", "--nmax", "10", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<Vec<f64>> = text.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 10);
    let first = (rows[0][3] - reference).abs();
    let last = (rows[9][3] - reference).abs();
    assert!(last < first, "exponent should move towards S = {reference}: {text}");
    assert!((rows[9][4] - reference).abs() < 1e-9);
    assert!(manifest_path(&out).exists());
}

#[test]
fn protocol_sim_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"target": "bell", "n": 40, "n_grid": [20, 40], "alpha": 0.5, "eps_gap": 1.6, "trials": 50, "adversary": {"kind": "maximally_mixed"}}"#,
    )
    .unwrap();
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}.json"));
        let csv = dir.path().join(format!("run{k}.csv"));
        let o = run(&["protocol-sim", "--config", s(&cfg), "--seed", "7", "--out", s(&out), "--csv", s(&csv)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push((std::fs::read(&out).unwrap(), std::fs::read(&csv).unwrap()));
        let m = RunManifest::read(&manifest_path(&out)).unwrap();
        assert_eq!(m.seed, Some(7));
    }
    assert_eq!(outputs[0], outputs[1]);
    let csv = String::from_utf8(outputs[0].1.clone()).unwrap();
    assert!(csv.starts_with("n,accept_rate,ci_low,ci_high\n"));
}

#[test]
fn usage_and_capacity_exit_codes() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["divergence", "--rho", "/nonexistent.json", "--sigma", "/nonexistent.json"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let (rho, sigma) = qubit_pair();
    let r = write_state(dir.path(), "rho.json", &rho);
    let q = write_state(dir.path(), "sigma.json", &sigma);
    let o = run(&["stein-curve", "--rho", s(&r), "--sigma", s(&q), "--eps", "0.05", "--nmax", "40"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn measure_and_robustness_on_bell() {
    let dir = tempfile::tempdir().unwrap();
    let bell = write_state(dir.path(), "bell.json", &max_entangled(2).density());
    let o = run(&["measure", "--rho", s(&bell), "--set", "ppt"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["result"]["value"].as_f64().unwrap() - 1.0).abs() < 0.02);
    let o = run(&["robustness", "--rho", s(&bell), "--set", "ppt", "--smooth", "0.1"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let lr = v["log_robustness"]["value"].as_f64().unwrap();
    assert!((lr - 1.0).abs() < 0.01);
    assert!(v["smoothed_upper_bound"]["value"].as_f64().unwrap() <= lr + 1e-12);
}

#[test]
fn povm_build_round_trips_through_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("frame.json");
    let o = run(&["povm-build", "--d", "3", "--seed", "4", "--km-trials", "50", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let f = steinlab::povm::Frame::read_json(&out).unwrap();
    assert_eq!(f.len(), 9);
    assert!(f.resolution_error() < 1e-10);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["km"]["estimate"].as_f64().unwrap() >= 1.0);
}

#[test]
fn checks_report_success() {
    let o = run(&["definetti-check", "--n", "4", "--states", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&["property-suite", "--family", "ppt", "--nmax", "2", "--trials", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["clauses"].as_array().unwrap().len(), 5);
}

#[test]
fn lambda_and_positive_part_tables() {
    let dir = tempfile::tempdir().unwrap();
    let bell = write_state(dir.path(), "bell.json", &max_entangled(2).density());
    let o = run(&["lambda-duality", "--pi", s(&bell), "--set", "ppt", "--k", "2,4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let last: Vec<&str> = text.lines().last().unwrap().split(',').collect();
    assert!((last[1].parse::<f64>().unwrap() - 0.5).abs() < 1e-3);
    let o = run(&["positive-part-curve", "--rho", s(&bell), "--family", "ppt", "--n", "1", "--y", "0,0.5,1.5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(rows.windows(2).all(|w| w[1] <= w[0] + 1e-6), "{text}");
    assert!(rows[2] < 1e-3);
}
