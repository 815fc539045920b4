use std::path::Path;

use super::*;
use crate::domain::Grid;
use crate::error::Error;
use crate::l1fdm::{L1Solver, TimeGrid};

fn small_1d(dir: &Path, epochs: usize) -> ExperimentConfig {
    let text = format!(
        r#"
        [system]
        dimension = 1
        alpha = 0.3
        t_final = 1.0
        coupling = [[1.0, -1.0], [-1.0, 1.0]]
        diffusion = [{{ family = "one_plus_x" }}, {{ family = "one_plus_x" }}]
        [discretization]
        nx = 24
        n_steps = 64
        [dataset]
        solve_chunk = 3
        [noise]
        levels = [0.01, 0.05]
        seed = 9
        [network]
        epochs = {epochs}
        [output]
        dir = "{}"
        "#,
        dir.display()
    );
    ExperimentConfig::from_toml(&text, Path::new(".")).unwrap()
}

#[test]
fn presets_validate_and_round_trip() {
    for cfg in [ExperimentConfig::paper_1d("a"), ExperimentConfig::paper_2d("b")] {
        cfg.validate().unwrap();
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap(), Path::new(".")).unwrap();
        assert_eq!(back, cfg);
    }
    let p1 = ExperimentConfig::paper_1d("a");
    assert_eq!(p1.system.alpha, 0.2);
    assert_eq!(p1.discretization.nx, 150);
    let p2 = ExperimentConfig::paper_2d("b");
    assert_eq!(p2.system.alpha, 0.4);
    assert_eq!((p2.discretization.nx, p2.discretization.ny), (64, Some(64)));
}

#[test]
fn invalid_configs_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let good = small_1d(dir.path(), 1).to_toml().unwrap();
    let cases = [
        good.replace("levels = [0.01, 0.05]", "levels = [1.5]"),
        good.replace("one_plus_x", "no_such_family"),
        good.replace("alpha = 0.3", "alpha = 1.0"),
        good.replace("[dataset]", "[dataset]\nunknown = 1"),
        good.replace("nx = 24", "nx = 24\nny = 24"),
    ];
    for text in cases {
        assert_ne!(text, good);
        assert!(matches!(
            ExperimentConfig::from_toml(&text, Path::new(".")),
            Err(Error::Config(_))
        ));
    }
}

#[test]
fn recipe_sizes() {
    assert_eq!(recipe_size(Recipe::SinePairs, 1, 5), 25);
    assert_eq!(recipe_size(Recipe::SinePairs, 2, 5), 625);
    let g = Grid::new_2d(6, 5).unwrap();
    let init = recipe_initial_values(&g, 5).unwrap();
    assert_eq!(init.len(), 625);
    assert_eq!(init[0].0, vec![1, 1, 1, 1]);
    assert_eq!(init[624].0, vec![5, 5, 5, 5]);
}

#[test]
fn dataset_matches_direct_solves_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_1d(dir.path(), 1);
    let setup = cfg.setup().unwrap();
    let ds = gen_dataset_with(&cfg, &setup).unwrap();
    assert_eq!(ds.samples.len(), 25);
    assert_eq!(ds.manifest.samples[7].modes, vec![2, 3]);

    let solver = L1Solver::new(&setup.operator, 0.3, TimeGrid::new(1.0, 64).unwrap()).unwrap();
    for i in [0, 7, 24] {
        let direct = solver
            .solve_batch(std::slice::from_ref(&ds.samples[i].target))
            .unwrap()
            .pop()
            .unwrap();
        let diff = (direct.values() - ds.samples[i].input.values())
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(diff < 1e-14 * direct.max_abs().max(1.0), "sample {i}: {diff:e}");
    }

    let again = gen_dataset(&cfg).unwrap();
    assert_eq!(again, ds);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    write_dataset(&a, &ds).unwrap();
    write_dataset(&b, &again).unwrap();
    for f in ["manifest.toml", "samples/0000.bin", "samples/0024.bin"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
    }
    assert_eq!(read_dataset(&a).unwrap(), ds);
}

#[test]
fn training_indices_spread() {
    assert_eq!(training_case_indices(25, None), (0..25).collect::<Vec<_>>());
    assert_eq!(training_case_indices(25, Some(40)).len(), 25);
    let v = training_case_indices(625, Some(25));
    assert_eq!(v.len(), 25);
    assert!(v.windows(2).all(|w| w[0] < w[1]) && *v.last().unwrap() < 625);
}

#[test]
fn small_experiment_reports_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_1d(&dir.path().join("run1"), 300);
    let rep = run_experiment(&cfg).unwrap();
    // 3 noise levels × 26 cases × 3 methods
    assert_eq!(rep.cells.len(), 3 * 26 * 3);
    assert!(rep.cells.iter().all(|c| c.rmse.is_some()), "{:?}", rep.cells.iter().find(|c| c.error.is_some()));
    let rows = read_summary_csv(&rep.summary).unwrap();
    assert_eq!(rows.len(), rep.cells.len());
    assert!(rows.iter().any(|r| r.case == "gen_x1mx" && r.group == "generalization"));
    for (r, c) in rows.iter().zip(&rep.cells) {
        assert_eq!(r.rmse, c.rmse);
        assert_eq!(r.noise, c.noise);
    }
    // clean L1 data: full spectral inversion and tiny-ε Tikhonov agree; the
    // slack covers the time-stepping error that ε damps very slightly
    let spec = rep.mean_rmse(Method::SpectralTruncated, CaseGroup::Training, 0.0).unwrap();
    let tik = rep.mean_rmse(Method::Tikhonov, CaseGroup::Training, 0.0).unwrap();
    assert!(spec <= tik * (1.0 + 1e-3), "{spec} vs {tik}");
    assert!(spec < 0.05, "{spec}");

    let cfg2 = small_1d(&dir.path().join("run2"), 300);
    let rep2 = run_experiment(&cfg2).unwrap();
    assert_eq!(
        std::fs::read(&rep.summary).unwrap(),
        std::fs::read(&rep2.summary).unwrap()
    );
    assert!(rep.out_dir.join("network.ckpt").exists());
    assert!(rep.out_dir.join("reconstructions/neural_gen_x1mx_noise005.csv").exists());
}

#[test]
fn empty_noise_list_is_clean_only() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_1d(dir.path(), 20);
    cfg.noise.levels.clear();
    cfg.inversion.methods = vec![Method::SpectralTruncated, Method::Tikhonov];
    let rep = run_experiment(&cfg).unwrap();
    assert!(rep.cells.iter().all(|c| c.noise == 0.0));
    assert_eq!(rep.cells.len(), 26 * 2);
    assert!(rep.network.is_none());
}

#[test]
fn failing_cells_become_error_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_1d(dir.path(), 20);
    cfg.inversion.methods = vec![Method::Tikhonov];
    cfg.inversion.discrepancy_factor = 1e12;
    let rep = run_experiment(&cfg).unwrap();
    let noisy: Vec<_> = rep.cells.iter().filter(|c| c.noise > 0.0).collect();
    assert!(!noisy.is_empty());
    assert!(noisy.iter().all(|c| c.error.as_deref().unwrap_or("").contains("bracket")));
    assert!(rep.cells.iter().filter(|c| c.noise == 0.0).all(|c| c.rmse.is_some()));
    let rows = read_summary_csv(&rep.summary).unwrap();
    assert!(rows.iter().any(|r| r.rmse.is_none() && !r.error.is_empty()));
}
