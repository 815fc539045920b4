use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DatasetSection, DiscretizationSection, ExperimentConfig, Recipe, SystemSection, SystemSetup};
use crate::domain::{Field, Grid};
use crate::error::{Error, Result};
use crate::io::{write_atomic, ArrayFile};
use crate::l1fdm::{L1Solver, TimeGrid};
use crate::neural::TrainingSample;

pub const DATASET_FORMAT: &str = "FRACBACK-DATASET v1";
pub const MANIFEST_NAME: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub index: usize,
    /// Sine indices: `[i, j]` in 1D, `[i, j, k, l]` in 2D.
    pub modes: Vec<usize>,
    /// Pair file holding `[observation, initial value]`.
    pub file: PathBuf,
}

/// Everything needed to regenerate a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub solver: String,
    /// Observations are sums of one solve per (component, sine) basis term.
    pub superposition: bool,
    pub grid: String,
    pub system: SystemSection,
    pub discretization: DiscretizationSection,
    pub dataset: DatasetSection,
    pub samples: Vec<SampleEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<TrainingSample>,
    pub manifest: DatasetManifest,
}

/// Index tuples of one component's sine factor, first index slowest.
fn mode_tuples(dim: usize, max_mode: usize) -> Vec<Vec<usize>> {
    match dim {
        1 => (1..=max_mode).map(|i| vec![i]).collect(),
        _ => (1..=max_mode)
            .flat_map(|i| (1..=max_mode).map(move |j| vec![i, j]))
            .collect(),
    }
}

fn sine_product(modes: &[usize], x: &[f64]) -> f64 {
    modes
        .iter()
        .zip(x)
        .map(|(&m, &xi)| (m as f64 * PI * xi).sin())
        .product()
}

/// Number of samples a recipe produces.
pub fn recipe_size(recipe: Recipe, dim: usize, max_mode: usize) -> usize {
    match recipe {
        Recipe::SinePairs => mode_tuples(dim, max_mode).len().pow(2),
    }
}

/// Sine-pair initial values in sample order.
pub fn recipe_initial_values(grid: &Grid, max_mode: usize) -> Result<Vec<(Vec<usize>, Field)>> {
    let tuples = mode_tuples(grid.dim(), max_mode);
    let mut out = Vec::with_capacity(tuples.len().pow(2));
    for a in &tuples {
        for b in &tuples {
            let f = Field::from_fn(*grid, 2, |k, x| sine_product(if k == 0 { a } else { b }, x))?;
            out.push(([a.as_slice(), b.as_slice()].concat(), f));
        }
    }
    Ok(out)
}

pub fn gen_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let setup = cfg.setup()?;
    gen_dataset_with(cfg, &setup)
}

/// Generates observations with the L1 scheme. The problem is linear with
/// zero source, so each sample's observation is the sum of the solves for
/// its two single-component terms; those basis solves run in parallel
/// chunks.
pub fn gen_dataset_with(cfg: &ExperimentConfig, setup: &SystemSetup) -> Result<Dataset> {
    let grid = setup.grid;
    let k = setup.operator.components();
    let max_mode = cfg.dataset.max_mode;
    let tuples = mode_tuples(grid.dim(), max_mode);
    let nt = tuples.len();
    let tg = TimeGrid::new(setup.t_final, cfg.discretization.n_steps)?;
    let solver = L1Solver::new(&setup.operator, setup.alpha, tg)?;

    let mut basis = Vec::with_capacity(k * nt);
    for c in 0..k {
        for t in &tuples {
            basis.push(Field::from_fn(grid, k, |kk, x| if kk == c { sine_product(t, x) } else { 0.0 })?);
        }
    }
    let first_user = |b: usize| if b < nt { b * nt } else { b - nt };
    let chunk = cfg.dataset.solve_chunk;
    let solved: Vec<Vec<Field>> = basis
        .par_chunks(chunk)
        .enumerate()
        .map(|(ci, u0s)| {
            solver.solve_batch(u0s).map_err(|e| Error::Sample {
                index: first_user(ci * chunk),
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let obs: Vec<Field> = solved.into_iter().flatten().collect();

    let initial = recipe_initial_values(&grid, max_mode)?;
    let mut samples = Vec::with_capacity(initial.len());
    let mut entries = Vec::with_capacity(initial.len());
    for (index, (modes, u0)) in initial.into_iter().enumerate() {
        let (a, b) = (index / nt, index % nt);
        let ut = Field::new(grid, obs[a].values() + obs[nt + b].values())?;
        samples.push(TrainingSample::new(ut, u0)?);
        entries.push(SampleEntry {
            index,
            modes,
            file: PathBuf::from(format!("samples/{index:04}.bin")),
        });
    }
    Ok(Dataset {
        samples,
        manifest: DatasetManifest {
            format: DATASET_FORMAT.into(),
            solver: format!("l1 n_steps={}", cfg.discretization.n_steps),
            superposition: true,
            grid: grid.describe(),
            system: cfg.system.clone(),
            discretization: cfg.discretization.clone(),
            dataset: cfg.dataset.clone(),
            samples: entries,
        },
    })
}

fn pair_file(s: &TrainingSample) -> Result<ArrayFile> {
    let g = s.input.grid();
    let mut shape = vec![2, s.input.components()];
    shape.extend(g.shape());
    let mut data = s.input.values().iter().copied().collect::<Vec<_>>();
    data.extend(s.target.values().iter().copied());
    ArrayFile::new(shape, g.describe(), data)
}

pub fn write_dataset(dir: &Path, ds: &Dataset) -> Result<()> {
    for (s, e) in ds.samples.iter().zip(&ds.manifest.samples) {
        pair_file(s)?.write(&dir.join(&e.file))?;
    }
    let text = toml::to_string(&ds.manifest)
        .map_err(|e| Error::Config(format!("serializing manifest: {e}")))?;
    write_atomic(&dir.join(MANIFEST_NAME), text.as_bytes())
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let path = dir.join(MANIFEST_NAME);
    let text = std::fs::read_to_string(&path)?;
    let manifest: DatasetManifest =
        toml::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
    if manifest.format != DATASET_FORMAT {
        return Err(Error::format(&path, format!("unsupported format {:?}", manifest.format)));
    }
    let mut samples = Vec::with_capacity(manifest.samples.len());
    for e in &manifest.samples {
        let p = dir.join(&e.file);
        let a = ArrayFile::read(&p)?;
        let shape = &a.shape;
        if shape.len() < 3 || shape[0] != 2 {
            return Err(Error::format(&p, format!("pair shape {shape:?}")));
        }
        let grid = Grid::from_shape(&shape[2..])?;
        let half = a.data.len() / 2;
        let k = shape[1];
        let field = |d: &[f64]| {
            ndarray::Array2::from_shape_vec((k, grid.points()), d.to_vec())
                .map_err(|err| Error::format(&p, err.to_string()))
                .and_then(|v| Field::new(grid, v))
        };
        samples.push(TrainingSample::new(field(&a.data[..half])?, field(&a.data[half..])?)?);
    }
    Ok(Dataset { samples, manifest })
}
