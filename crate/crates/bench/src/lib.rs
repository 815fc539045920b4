//! Fixtures shared by the benchmarks.

use std::f64::consts::PI;

use fracback_core::domain::{Field, Grid};
use fracback_core::harness::{ExperimentConfig, SystemSetup};

/// The 1D paper system, optionally on a coarser grid.
pub fn paper_1d(nx: usize) -> SystemSetup {
    let mut cfg = ExperimentConfig::paper_1d("bench");
    cfg.discretization.nx = nx;
    cfg.setup().expect("preset is valid")
}

/// The 2D paper system on an `n × n` grid.
pub fn paper_2d(n: usize) -> SystemSetup {
    let mut cfg = ExperimentConfig::paper_2d("bench");
    cfg.discretization.nx = n;
    cfg.discretization.ny = Some(n);
    cfg.setup().expect("preset is valid")
}

/// `(sin aπx, sin bπx)` sampled on `grid`, extended as a product in 2D.
pub fn sine_pair(grid: Grid, a: f64, b: f64) -> Field {
    Field::from_fn(grid, 2, |k, x| {
        let m = if k == 0 { a } else { b };
        x.iter().map(|v| (m * PI * v).sin()).product()
    })
    .expect("finite")
}
