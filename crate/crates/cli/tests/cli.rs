use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use surprise::simulation::constants::Constants;
use surprise::simulation::scenario::{Generator, Response};
use surprise::{fit_ht, load_csv, FitOptions, Family, LossModel, Subsample};

fn surprise(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_surprise")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = surprise(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn logistic_csv(dir: &Path, n: usize) -> PathBuf {
    let g = Generator { response: Response::Bernoulli, alpha: -1.0, beta: vec![1.0, -0.5, 0.25], quad: 0.0, x_sd: 1.0 };
    let path = dir.join("data.csv");
    g.generate_at(n, 11, &[0]).write_csv(fs::File::create(&path).unwrap()).unwrap();
    path
}

fn read_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path).unwrap().lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

fn estimates(path: &Path) -> Vec<(f64, Option<f64>)> {
    read_rows(path).iter().map(|r| (r[1].parse().unwrap(), r[2].parse().ok())).collect()
}

#[test]
fn near_unit_rate_keeps_nearly_everything() {
    let dir = tempfile::tempdir().unwrap();
    let data = logistic_csv(dir.path(), 60);
    let out = dir.path().join("o");
    ok(&["sample", "--data", s(&data), "--rate", "0.999999", "--pilot-size", "60", "--out", s(&out)]);
    let rows = read_rows(&out.join("subsample.csv"));
    assert!(rows.len() >= 59);
    for r in &rows {
        let w: f64 = r[1].parse().unwrap();
        assert!((w - 1.0).abs() < 1e-4, "weight {w}");
    }
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = logistic_csv(dir.path(), 3000);
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        ok(&["sample", "--data", s(&data), "--rate", "0.1", "--seed", seed, "--out", s(&out)]);
        fs::read(out.join("subsample.csv")).unwrap()
    };
    let a = run("a", "4");
    assert_eq!(a, run("b", "4"));
    assert_ne!(a, run("c", "5"));
}

#[test]
fn lcc_probabilities_match_hand_computation() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("six.csv");
    fs::write(&data, "y,x\n1,0.5\n0,-1\n1,2\n0,0\n0,1.5\n1,-0.5\n").unwrap();
    let pilot = dir.path().join("pilot.csv");
    fs::write(&pilot, "theta\n-0.25\n0.8\n").unwrap();
    let out = dir.path().join("o");
    ok(&["sample", "--data", s(&data), "--objective", "lcc", "--pilot", "external", "--pilot-file", s(&pilot), "--out", s(&out)]);
    let xs: [f64; 6] = [0.5, -1.0, 2.0, 0.0, 1.5, -0.5];
    let ys: [f64; 6] = [1.0, 0.0, 1.0, 0.0, 0.0, 1.0];
    let rows = read_rows(&out.join("plan.csv"));
    assert_eq!(rows.len(), 6);
    for (i, r) in rows.iter().enumerate() {
        let p = 1.0 / (1.0 + (-(-0.25 + 0.8 * xs[i])).exp());
        let want = (ys[i] - p).abs();
        let got: f64 = r[2].parse().unwrap();
        assert!((got - want).abs() < 1e-15, "row {i}: {got} vs {want}");
    }
}

#[test]
fn uniform_objective_matches_unweighted_fit() {
    let dir = tempfile::tempdir().unwrap();
    let data = logistic_csv(dir.path(), 4000);
    let out = dir.path().join("o");
    let args = ["--data", s(&data), "--rate", "0.25", "--objective", "uniform", "--seed", "3", "--out", s(&out)];
    ok(&[&["sample"], &args[..]].concat());
    let kept: Vec<usize> = read_rows(&out.join("subsample.csv")).iter().map(|r| r[0].parse().unwrap()).collect();
    ok(&[&["fit"], &args[..]].concat());
    let got = estimates(&out.join("estimates.csv"));

    let d = load_csv(&data, Some("y"), false).unwrap();
    let model = LossModel::for_covariates(Family::Logistic, d.q());
    let plain = fit_ht(&d, model, &Subsample::uniform(kept, 1.0), None, &FitOptions::default()).unwrap();
    for (j, (est, _)) in got.iter().enumerate() {
        assert!((est - plain.theta_hat[j]).abs() < 1e-6, "coordinate {j}: {est} vs {}", plain.theta_hat[j]);
    }
}

#[test]
fn rate_near_one_recovers_full_fit() {
    let dir = tempfile::tempdir().unwrap();
    let data = logistic_csv(dir.path(), 500);
    let out = dir.path().join("o");
    ok(&["fit", "--data", s(&data), "--rate", "0.999999999", "--pilot-size", "500", "--out", s(&out)]);
    let got = estimates(&out.join("estimates.csv"));
    let d = load_csv(&data, Some("y"), false).unwrap();
    let model = LossModel::for_covariates(Family::Logistic, d.q());
    let full = fit_ht(&d, model, &Subsample::full(d.n()), None, &FitOptions::default()).unwrap();
    for (j, (est, _)) in got.iter().enumerate() {
        assert!((est - full.theta_hat[j]).abs() < 1e-6, "coordinate {j}: {est} vs {}", full.theta_hat[j]);
    }
}

#[test]
fn poisson_fit_covers_generating_parameter() {
    let dir = tempfile::tempdir().unwrap();
    let g = Constants::get().sim5_correct();
    let data = dir.path().join("counts.csv");
    g.generate_at(100_000, 5, &[0]).write_csv(fs::File::create(&data).unwrap()).unwrap();
    let out = dir.path().join("o");
    ok(&["fit", "--data", s(&data), "--loss", "poisson", "--objective", "lcc", "--rate", "0.01", "--out", s(&out)]);
    for ((est, se), truth) in estimates(&out.join("estimates.csv")).iter().zip(g.theta0()) {
        let se = se.expect("standard error");
        assert!((est - truth).abs() < 3.0 * se, "{est} vs {truth} (se {se})");
    }
}

#[test]
fn simulate_writes_table_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let text = ok(&["simulate", "--scenario", "sim1", "--reps", "2", "--out", s(&out)]);
    assert!(text.contains("Bias^2") && text.contains("CP (%)"));
    let csv = fs::read_to_string(out.join("summary.csv")).unwrap();
    let mut lines = csv.lines();
    let width = lines.next().unwrap().split(',').count();
    let rows: Vec<&str> = lines.collect();
    assert!(rows.iter().all(|l| l.split(',').count() == width));
    for est in ["LCC", "HT", "Full MLE"] {
        assert!(rows.iter().any(|l| l.split(',').nth(3) == Some(est)), "missing {est}");
    }
}

#[test]
fn scenario_file_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let mut sc = surprise::simulation::Scenario::builtin(surprise::simulation::ScenarioId::Sim6, Default::default()).unwrap();
    sc.n = 5_000;
    sc.replications = 3;
    let path = dir.path().join("small.toml");
    fs::write(&path, toml::to_string(&sc).unwrap()).unwrap();
    let out = dir.path().join("o");
    ok(&["simulate", "--scenario", s(&path), "--out", s(&out)]);
    assert!(fs::read_to_string(out.join("summary.txt")).unwrap().contains("n = 5000, 3 replications"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| surprise(args).status.code();
    assert_eq!(code(&["simulate", "--scenario", "sim7"]), Some(2));
    assert_eq!(code(&["fit", "--rate", "0.1"]), Some(2));
    assert_eq!(code(&["fit", "--data", "missing.csv", "--rate", "0.1"]), Some(2));
    assert_eq!(code(&["frobnicate"]), Some(2));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "y,x\n1,0.5\n0,oops\n").unwrap();
    assert_eq!(code(&["sample", "--data", s(&bad), "--rate", "0.5"]), Some(1));
    let flat = dir.path().join("flat.csv");
    fs::write(&flat, "y,x\n1,2\n0,2\n1,2\n").unwrap();
    assert_eq!(code(&["sample", "--data", s(&flat), "--rate", "0.5", "--standardize"]), Some(1));
    let out = surprise(&["sample", "--data", s(&bad), "--rate", "0.5"]);
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.lines().count(), 1, "one-line diagnostic: {err}");
}

#[test]
fn manifest_digests_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = logistic_csv(dir.path(), 2000);
    let out = dir.path().join("o");
    ok(&["fit", "--data", s(&data), "--rate", "0.2", "--seed", "8", "--out", s(&out)]);
    let manifest: toml::Value = toml::from_str(&fs::read_to_string(out.join("manifest.toml")).unwrap()).unwrap();
    assert_eq!(manifest["seed"].as_integer(), Some(8));
    assert_eq!(manifest["config"]["rate"].as_float(), Some(0.2));
    assert!(manifest["version"].as_str().is_some());
    let report = ok(&["report", "--out", s(&out)]);
    assert!(report.contains("1 outputs verified") && report.contains("intercept"));

    fs::write(out.join("estimates.csv"), "tampered\n").unwrap();
    assert_eq!(surprise(&["report", "--out", s(&out)]).status.code(), Some(1));
}

#[test]
fn config_file_is_equivalent_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    let data = logistic_csv(dir.path(), 3000);
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "data = \"data.csv\"\nrate = 0.15\nobjective = \"mse\"\nseed = 21\nout = \"from-file\"\n").unwrap();
    ok(&["sample", "--config", s(&cfg)]);
    let flags = dir.path().join("from-flags");
    ok(&["sample", "--data", s(&data), "--rate", "0.15", "--objective", "mse", "--seed", "21", "--out", s(&flags)]);
    assert_eq!(
        fs::read(dir.path().join("from-file/subsample.csv")).unwrap(),
        fs::read(flags.join("subsample.csv")).unwrap()
    );
}

#[test]
fn probability_floor_is_respected() {
    let dir = tempfile::tempdir().unwrap();
    let data = logistic_csv(dir.path(), 3000);
    let out = dir.path().join("o");
    ok(&["sample", "--data", s(&data), "--rate", "0.1", "--min-prob", "0.02", "--out", s(&out)]);
    let probs: Vec<f64> = read_rows(&out.join("plan.csv")).iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(probs.iter().all(|&p| p >= 0.02 - 1e-15));
    assert!(probs.iter().sum::<f64>() <= 300.0 + 1e-6);
}

#[test]
fn direction_and_transforms() {
    let dir = tempfile::tempdir().unwrap();
    let data = logistic_csv(dir.path(), 2000);
    let out = dir.path().join("o");
    let base = ["--data", s(&data), "--rate", "0.2", "--out", s(&out)];
    ok(&[&["fit"], &base[..], &["--objective", "direction", "--direction-vector", "0,1,0,0", "--standardize"]].concat());
    let code = surprise(&[&["fit"], &base[..], &["--objective", "direction", "--direction-vector", "0,1"]].concat());
    assert_eq!(code.status.code(), Some(2));
    ok(&[&["sample"], &base[..], &["--log-offset", "10"]].concat());
    assert_eq!(surprise(&[&["sample"], &base[..], &["--log-offset", "0"]].concat()).status.code(), Some(1));
}
