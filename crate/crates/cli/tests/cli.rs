use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

use fracback_core::domain::{Field, Grid};
use fracback_core::io::{read_field_csv, write_field_csv};

fn fracback(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracback"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = fracback(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

const SMALL: &str = r#"
[system]
dimension = 1
alpha = 0.3
t_final = 1.0
coupling = [[1.0, -1.0], [-1.0, 1.0]]
diffusion = [{ family = "one_plus_x" }, { family = "one_plus_x" }]
[discretization]
nx = 16
n_steps = 64
[dataset]
max_mode = 3
[noise]
levels = [0.01]
seed = 3
[network]
epochs = 40
[output]
dir = "run"
"#;

fn rel(a: &Field, b: &Field) -> f64 {
    let num = (a.values() - b.values()).mapv(|v| v * v).sum().sqrt();
    num / b.values().mapv(|v| v * v).sum().sqrt()
}

#[test]
fn mlf_prints_values() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(dir.path(), &["mlf", "--alpha", "1", "0", "1", "2.5"]);
    let vals: Vec<f64> = text
        .lines()
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(vals.len(), 3);
    for (v, x) in vals.iter().zip([0.0f64, 1.0, 2.5]) {
        assert!((v - (-x).exp()).abs() < 1e-14);
    }
    let bad = fracback(dir.path(), &["mlf", "--alpha", "1.5", "1"]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).starts_with("error:"));
}

#[test]
fn preset_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(dir.path(), &["config", "--preset", "paper1d", "--out", "x"]);
    std::fs::write(dir.path().join("p.toml"), &text).unwrap();
    let again = ok(dir.path(), &["eigen", "--config", "p.toml", "--count", "3", "--output", "ev.csv"]);
    assert_eq!(again.lines().count(), 3);
    let ev = std::fs::read_to_string(dir.path().join("ev.csv")).unwrap();
    assert_eq!(ev.lines().count(), 301);
}

#[test]
fn forward_and_backward_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("small.toml"), SMALL).unwrap();
    let grid = Grid::new_1d(16).unwrap();
    let u0 = Field::from_fn(grid, 2, |k, x| ((2 + k) as f64 * PI * x[0]).sin()).unwrap();
    write_field_csv(&d.join("u0.csv"), &u0).unwrap();

    let base = ["--config", "small.toml"];
    let run = |extra: &[&str]| {
        let mut a = vec![extra[0]];
        a.extend(base);
        a.extend(&extra[1..]);
        ok(d, &a)
    };
    run(&["forward", "--input", "u0.csv", "--output", "l1.csv"]);
    run(&["forward", "--input", "u0.csv", "--output", "sp.csv", "--solver", "spectral"]);
    let (l1, sp) = (read_field_csv(&d.join("l1.csv")).unwrap(), read_field_csv(&d.join("sp.csv")).unwrap());
    assert!(rel(&l1, &sp) < 1e-2);

    run(&["backward", "--input", "sp.csv", "--output", "back.csv", "--method", "spectral"]);
    assert!(rel(&read_field_csv(&d.join("back.csv")).unwrap(), &u0) < 1e-8);
    run(&["backward", "--input", "sp.csv", "--output", "tik.csv", "--method", "tikhonov", "--epsilon", "1e-12"]);
    assert!(rel(&read_field_csv(&d.join("tik.csv")).unwrap(), &u0) < 1e-3);
    run(&["backward", "--input", "sp.csv", "--output", "tr.csv", "--method", "truncated", "--cutoff", "32"]);
    assert!(rel(&read_field_csv(&d.join("tr.csv")).unwrap(), &u0) < 1e-8);

    let missing = fracback(d, &["backward", "--config", "small.toml", "--input", "sp.csv", "--output", "x.csv", "--method", "tikhonov"]);
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("--epsilon"));
}

#[test]
fn staged_pipeline_matches_one_shot_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("small.toml"), SMALL).unwrap();
    let c = ["--config", "small.toml"];
    ok(d, &["gen-dataset", c[0], c[1], "--out", "staged"]);
    assert!(d.join("staged/dataset/manifest.toml").exists());
    assert!(d.join("staged/dataset/samples/0008.bin").exists());
    ok(d, &["train", c[0], c[1], "--out", "staged"]);
    let staged = ok(d, &["evaluate", c[0], c[1], "--out", "staged"]);
    let once = ok(d, &["run-experiment", c[0], c[1], "--out", "once"]);
    assert_eq!(staged, once);
    assert!(staged.starts_with("method,group,noise,mean_rmse,cases,failed"));
    assert_eq!(
        std::fs::read(d.join("staged/summary.csv")).unwrap(),
        std::fs::read(d.join("once/summary.csv")).unwrap()
    );

    let obs = d.join("once/reconstructions/truth_gen_x1mx.csv");
    ok(d, &["reconstruct", "--checkpoint", "once/network.ckpt", "--input", obs.to_str().unwrap(), "--output", "rec.csv"]);
    assert_eq!(read_field_csv(&d.join("rec.csv")).unwrap().components(), 2);

    let seeded = ok(d, &["run-experiment", c[0], c[1], "--out", "seeded", "--seed", "5"]);
    assert_ne!(seeded, once);
}

#[test]
fn bad_inputs_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.toml"), SMALL.replace("alpha = 0.3", "alpha = 1.3")).unwrap();
    for args in [
        vec!["eigen", "--config", "bad.toml"],
        vec!["eigen", "--config", "missing.toml"],
        vec!["eigen"],
        vec!["train", "--preset", "paper1d", "--out", "nowhere"],
    ] {
        let out = fracback(d, &args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"), "{args:?}");
    }
}
