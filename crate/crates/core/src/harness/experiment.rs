use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, Method, NoiseScale, SystemSetup, TikhonovRoute, DENSE_TIKHONOV_MAX};
use super::dataset::{gen_dataset_with, write_dataset, Dataset};
use super::metrics::{add_noise, noise_estimate, relative_rmse};
use super::worker_pool;
use crate::domain::{Field, Grid};
use crate::error::{Error, Result};
use crate::inversion::{
    backward_spectral, backward_tikhonov, backward_tikhonov_filter, build_forward_map,
    truncation_by_discrepancy, ForwardMap, Provenance, RegularizationChoice,
};
use crate::io::{write_atomic, write_field_csv};
use crate::l1fdm::{L1Solver, TimeGrid};
use crate::neural::{forward_pass, train_from, Checkpoint, NetworkConfig, NetworkParams, TrainOutcome};
use crate::spectral::EigenSystem;

pub const RUN_MANIFEST_FORMAT: &str = "FRACBACK-RUN v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseGroup {
    Training,
    Generalization,
}

impl CaseGroup {
    pub fn name(self) -> &'static str {
        match self {
            CaseGroup::Training => "training",
            CaseGroup::Generalization => "generalization",
        }
    }
}

/// A reconstruction target together with its clean observation.
#[derive(Debug, Clone)]
pub struct TestCase {
    pub name: String,
    pub group: CaseGroup,
    pub truth: Field,
    pub observation: Field,
}

/// Initial values outside the training family: `x(1-x)` for both
/// components in 1D; `sin(3πx)sin(3πy)` and `2^8 x²(1-x)²y²(1-y)²` in 2D.
pub fn generalization_initial(grid: &Grid) -> Result<(String, Field)> {
    if grid.dim() == 1 {
        let f = Field::from_fn(*grid, 2, |_, x| x[0] * (1.0 - x[0]))?;
        Ok(("gen_x1mx".into(), f))
    } else {
        let f = Field::from_fn(*grid, 2, |k, x| {
            let (a, b) = (x[0], x[1]);
            if k == 0 {
                (3.0 * std::f64::consts::PI * a).sin() * (3.0 * std::f64::consts::PI * b).sin()
            } else {
                256.0 * (a * (1.0 - a) * b * (1.0 - b)).powi(2)
            }
        })?;
        Ok(("gen_sin33_poly".into(), f))
    }
}

/// Evenly spaced sample indices, all of them when `count` is absent or large.
pub fn training_case_indices(total: usize, count: Option<usize>) -> Vec<usize> {
    match count {
        Some(c) if c < total => (0..c).map(|i| i * total / c + total / (2 * c)).collect(),
        _ => (0..total).collect(),
    }
}

pub fn build_cases(cfg: &ExperimentConfig, setup: &SystemSetup, ds: &Dataset) -> Result<Vec<TestCase>> {
    let mut cases: Vec<TestCase> = training_case_indices(ds.samples.len(), cfg.inversion.training_cases)
        .into_iter()
        .map(|i| TestCase {
            name: format!("train_{i:04}"),
            group: CaseGroup::Training,
            truth: ds.samples[i].target.clone(),
            observation: ds.samples[i].input.clone(),
        })
        .collect();
    let (name, truth) = generalization_initial(&setup.grid)?;
    if truth.components() == setup.operator.components() {
        let tg = TimeGrid::new(setup.t_final, cfg.discretization.n_steps)?;
        let solver = L1Solver::new(&setup.operator, setup.alpha, tg)?;
        let observation = solver
            .solve_batch(std::slice::from_ref(&truth))?
            .pop()
            .expect("one solve");
        cases.push(TestCase {
            name,
            group: CaseGroup::Generalization,
            truth,
            observation,
        });
    }
    Ok(cases)
}

/// Fitted network and its training record.
#[derive(Debug, Clone)]
pub struct TrainedNetwork {
    pub config: NetworkConfig,
    pub outcome: TrainOutcome,
}

pub fn train_network(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    progress: impl FnMut(usize, f64),
) -> Result<TrainedNetwork> {
    let grid = *ds
        .samples
        .first()
        .ok_or_else(|| Error::precondition("empty dataset"))?
        .input
        .grid();
    let config = cfg.network_config(&grid)?;
    let params = NetworkParams::init(&config);
    let outcome = train_from(&config, params, &ds.samples, cfg.train_options(), progress)?;
    Ok(TrainedNetwork { config, outcome })
}

/// Inverse solvers available to the evaluation.
pub struct Solvers<'a> {
    pub setup: &'a SystemSetup,
    pub eigen: Option<&'a EigenSystem>,
    pub forward_map: Option<&'a ForwardMap>,
    pub network: Option<(&'a NetworkConfig, &'a NetworkParams)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub method: Method,
    pub noise: f64,
    pub case: String,
    pub group: CaseGroup,
    pub rmse: Option<f64>,
    /// Chosen ε or cutoff.
    pub parameter: String,
    pub error: Option<String>,
}

/// Noise levels evaluated: clean first, then the configured ones.
pub fn noise_levels(cfg: &ExperimentConfig) -> Vec<f64> {
    let mut v = vec![0.0];
    for &d in &cfg.noise.levels {
        if !v.contains(&d) {
            v.push(d);
        }
    }
    v
}

fn reconstruct(
    method: Method,
    cfg: &ExperimentConfig,
    s: &Solvers<'_>,
    obs: &Field,
    delta: f64,
    estimate: f64,
) -> Result<(Field, String)> {
    let (alpha, t) = (s.setup.alpha, s.setup.t_final);
    let need_eigen = || s.eigen.ok_or_else(|| Error::precondition("no eigensystem available"));
    let factor = cfg.inversion.discrepancy_factor;
    match method {
        Method::Tikhonov => {
            let reg = if delta == 0.0 {
                RegularizationChoice::Fixed {
                    epsilon: cfg.inversion.clean_epsilon,
                }
            } else {
                RegularizationChoice::Discrepancy {
                    noise_estimate: estimate,
                    factor,
                }
            };
            let r = match s.forward_map {
                Some(fm) => backward_tikhonov(fm, obs, reg)?,
                None => backward_tikhonov_filter(need_eigen()?, alpha, t, obs, reg)?,
            };
            Ok((r.field, format!("epsilon={:e}", r.epsilon)))
        }
        Method::SpectralTruncated => {
            let es = need_eigen()?;
            let cutoff = if delta == 0.0 {
                cfg.inversion.clean_cutoff.unwrap_or(es.len()).min(es.len())
            } else {
                truncation_by_discrepancy(es, alpha, t, obs, estimate, factor)?
            };
            let f = backward_spectral(es, alpha, t, obs, Some(cutoff))?;
            Ok((f, format!("cutoff={cutoff}")))
        }
        Method::Neural => {
            let (nc, np) = s
                .network
                .ok_or_else(|| Error::precondition("no trained network available"))?;
            Ok((forward_pass(nc, np, obs)?, String::new()))
        }
    }
}

/// One reconstruction per (noise level, case, method). Noise for case `c` at
/// level index `l` is drawn with seed `noise.seed + l * cases + c` and shared
/// by all methods. Failing cells become error rows.
pub fn evaluate(
    cfg: &ExperimentConfig,
    solvers: &Solvers<'_>,
    cases: &[TestCase],
) -> Result<(Vec<CellResult>, Vec<(CellResult, Field)>)> {
    let levels = noise_levels(cfg);
    let scale: NoiseScale = cfg.noise.scale;
    let jobs: Vec<(usize, usize)> = (0..levels.len())
        .flat_map(|l| (0..cases.len()).map(move |c| (l, c)))
        .collect();
    let per_job: Vec<Vec<(CellResult, Option<Field>)>> = jobs
        .par_iter()
        .map(|&(l, c)| {
            let case = &cases[c];
            let delta = levels[l];
            let seed = cfg.noise.seed + (l * cases.len() + c) as u64;
            let obs = add_noise(&case.observation, delta, seed, scale)?;
            let estimate = noise_estimate(&case.observation, delta, scale);
            Ok(cfg
                .inversion
                .methods
                .iter()
                .map(|&m| {
                    let mut cell = CellResult {
                        method: m,
                        noise: delta,
                        case: case.name.clone(),
                        group: case.group,
                        rmse: None,
                        parameter: String::new(),
                        error: None,
                    };
                    match reconstruct(m, cfg, solvers, &obs, delta, estimate)
                        .and_then(|(f, p)| relative_rmse(&f, &case.truth).map(|r| (f, p, r)))
                    {
                        Ok((f, p, r)) => {
                            cell.rmse = Some(r);
                            cell.parameter = p;
                            (cell, Some(f))
                        }
                        Err(e) => {
                            cell.error = Some(e.to_string());
                            (cell, None)
                        }
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut cells = Vec::new();
    let mut fields = Vec::new();
    for (cell, f) in per_job.into_iter().flatten() {
        if let Some(f) = f {
            fields.push((cell.clone(), f));
        }
        cells.push(cell);
    }
    Ok((cells, fields))
}

/// Averages over cases: `(method, group, noise) -> (mean, successes, failures)`.
pub fn noise_curve(cells: &[CellResult]) -> BTreeMap<(Method, CaseGroup, u64), (f64, usize, usize)> {
    let mut acc: BTreeMap<(Method, CaseGroup, u64), (f64, usize, usize)> = BTreeMap::new();
    for c in cells {
        let e = acc.entry((c.method, c.group, c.noise.to_bits())).or_default();
        match c.rmse {
            Some(r) => {
                e.0 += r;
                e.1 += 1;
            }
            None => e.2 += 1,
        }
    }
    for v in acc.values_mut() {
        if v.1 > 0 {
            v.0 /= v.1 as f64;
        } else {
            v.0 = f64::NAN;
        }
    }
    acc
}

fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

pub const SUMMARY_HEADER: [&str; 7] = ["method", "noise", "case", "group", "rmse", "parameter", "error"];

pub fn summary_csv(cells: &[CellResult]) -> Result<Vec<u8>> {
    let rows = cells
        .iter()
        .map(|c| {
            vec![
                c.method.name().to_string(),
                format!("{:?}", c.noise),
                c.case.clone(),
                c.group.name().to_string(),
                c.rmse.map(|r| format!("{r:?}")).unwrap_or_default(),
                c.parameter.clone(),
                c.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    csv_bytes(&SUMMARY_HEADER, rows)
}

pub fn curve_csv(cells: &[CellResult]) -> Result<Vec<u8>> {
    let rows = noise_curve(cells)
        .into_iter()
        .map(|((m, g, bits), (mean, ok, bad))| {
            vec![
                m.name().to_string(),
                g.name().to_string(),
                format!("{:?}", f64::from_bits(bits)),
                format!("{mean:?}"),
                ok.to_string(),
                bad.to_string(),
            ]
        })
        .collect();
    csv_bytes(&["method", "group", "noise", "mean_rmse", "cases", "failed"], rows)
}

/// Parsed row of a summary CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub noise: f64,
    pub case: String,
    pub group: String,
    pub rmse: Option<f64>,
    pub parameter: String,
    pub error: String,
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::format(path, e.to_string()))?;
        if rec.len() != SUMMARY_HEADER.len() {
            return Err(Error::format(path, format!("row with {} fields", rec.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| Error::format(path, format!("{s:?}: {e}")));
        out.push(SummaryRow {
            method: rec[0].to_string(),
            noise: num(&rec[1])?,
            case: rec[2].to_string(),
            group: rec[3].to_string(),
            rmse: if rec[4].is_empty() { None } else { Some(num(&rec[4])?) },
            parameter: rec[5].to_string(),
            error: rec[6].to_string(),
        });
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    format: &'static str,
    version: &'static str,
    noise_scale: NoiseScale,
    noise_seed_rule: &'static str,
    noise_levels: Vec<f64>,
    network_seed: u64,
    shuffle_seed: u64,
    tikhonov_route: String,
    eigenpairs: usize,
    training_cases: Vec<String>,
    final_training_loss: Option<f64>,
    initial_training_loss: Option<f64>,
    timings_seconds: BTreeMap<String, f64>,
    failed_cells: usize,
    config: &'a ExperimentConfig,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub cells: Vec<CellResult>,
    pub out_dir: PathBuf,
    pub summary: PathBuf,
    pub curve: PathBuf,
    pub manifest: PathBuf,
    pub network: Option<TrainedNetwork>,
    pub timings: BTreeMap<String, f64>,
}

impl ExperimentReport {
    /// Mean RMSE of a method over a case group at one noise level.
    pub fn mean_rmse(&self, method: Method, group: CaseGroup, noise: f64) -> Option<f64> {
        noise_curve(&self.cells)
            .get(&(method, group, noise.to_bits()))
            .map(|v| v.0)
            .filter(|v| v.is_finite())
    }
}

fn noise_tag(d: f64) -> String {
    format!("noise{:03}", (d * 100.0).round() as i64)
}

struct Clock {
    start: Instant,
    timings: BTreeMap<String, f64>,
}

impl Clock {
    fn new() -> Self {
        Self {
            start: Instant::now(),
            timings: BTreeMap::new(),
        }
    }

    fn lap(&mut self, name: &str) {
        self.timings.insert(name.to_string(), self.start.elapsed().as_secs_f64());
        self.start = Instant::now();
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_logged(cfg, &mut |_| {})
}

/// Dataset generation, training and evaluation, with progress messages.
pub fn run_experiment_logged(cfg: &ExperimentConfig, log: &mut dyn FnMut(&str)) -> Result<ExperimentReport> {
    cfg.validate()?;
    let pool = worker_pool()?;
    let out = cfg.output_dir();
    std::fs::create_dir_all(&out)?;
    let mut clock = Clock::new();

    let setup = cfg.setup()?;
    log(&format!("assembled {} system with {} unknowns", setup.grid.describe(), setup.operator.dim()));
    let ds = pool.install(|| gen_dataset_with(cfg, &setup))?;
    write_dataset(&out.join("dataset"), &ds)?;
    clock.lap("dataset");
    log(&format!("generated {} samples", ds.samples.len()));

    let network = if cfg.inversion.methods.contains(&Method::Neural) {
        let every = (cfg.network.epochs / 20).max(1);
        let trained = train_network(cfg, &ds, |e, l| {
            if e % every == 0 {
                log(&format!("epoch {e}: loss {l:e}"));
            }
        })?;
        write_network(&out, &trained)?;
        clock.lap("training");
        Some(trained)
    } else {
        None
    };
    evaluate_and_write(cfg, &setup, &ds, network, clock, log)
}

/// Writes `network.ckpt` and `loss_history.csv`.
pub fn write_network(out: &Path, trained: &TrainedNetwork) -> Result<()> {
    Checkpoint {
        config: trained.config.clone(),
        params: trained.outcome.params.clone(),
        epochs: trained.outcome.history.len(),
    }
    .write(&out.join("network.ckpt"))?;
    let hist: Vec<Vec<String>> = trained
        .outcome
        .history
        .iter()
        .enumerate()
        .map(|(i, l)| vec![(i + 1).to_string(), format!("{l:?}")])
        .collect();
    write_atomic(&out.join("loss_history.csv"), &csv_bytes(&["epoch", "loss"], hist)?)
}

/// Evaluates a saved dataset with an optional saved network and writes the
/// report files into the configured output directory.
pub fn evaluate_saved(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    checkpoint: Option<Checkpoint>,
    log: &mut dyn FnMut(&str),
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let setup = cfg.setup()?;
    let network = checkpoint.map(|c| TrainedNetwork {
        config: c.config,
        outcome: TrainOutcome {
            params: c.params,
            history: Vec::new(),
            initial_loss: f64::NAN,
        },
    });
    if network.is_none() && cfg.inversion.methods.contains(&Method::Neural) {
        log("no checkpoint given; neural cells will be error rows");
    }
    evaluate_and_write(cfg, &setup, ds, network, Clock::new(), log)
}

fn evaluate_and_write(
    cfg: &ExperimentConfig,
    setup: &SystemSetup,
    ds: &Dataset,
    network: Option<TrainedNetwork>,
    mut clock: Clock,
    log: &mut dyn FnMut(&str),
) -> Result<ExperimentReport> {
    let pool = worker_pool()?;
    let out = cfg.output_dir();
    std::fs::create_dir_all(&out)?;
    let methods = &cfg.inversion.methods;
    let eigen = if methods.iter().any(|m| *m != Method::Neural) {
        let es = EigenSystem::with_method(setup.operator.clone(), cfg.discretization.eigen_method)?;
        clock.lap("eigen");
        log(&format!("eigensystem with {} pairs", es.len()));
        Some(es)
    } else {
        None
    };
    let dense = match cfg.inversion.tikhonov_route {
        TikhonovRoute::Dense => true,
        TikhonovRoute::Filter => false,
        TikhonovRoute::Auto => setup.operator.dim() <= DENSE_TIKHONOV_MAX,
    };
    let forward_map = match (&eigen, methods.contains(&Method::Tikhonov) && dense) {
        (Some(es), true) => Some(build_forward_map(es, setup.alpha, setup.t_final, Provenance::Spectral)?),
        _ => None,
    };

    let cases = build_cases(cfg, setup, ds)?;
    let solvers = Solvers {
        setup,
        eigen: eigen.as_ref(),
        forward_map: forward_map.as_ref(),
        network: network.as_ref().map(|t| (&t.config, &t.outcome.params)),
    };
    let (cells, fields) = pool.install(|| evaluate(cfg, &solvers, &cases))?;
    clock.lap("evaluation");
    log(&format!("evaluated {} cells", cells.len()));

    if cfg.output.write_reconstructions {
        let rec = out.join("reconstructions");
        for case in &cases {
            write_field_csv(&rec.join(format!("truth_{}.csv", case.name)), &case.truth)?;
        }
        for (cell, f) in &fields {
            let name = format!("{}_{}_{}.csv", cell.method.name(), cell.case, noise_tag(cell.noise));
            write_field_csv(&rec.join(name), f)?;
        }
    }
    let summary = out.join("summary.csv");
    write_atomic(&summary, &summary_csv(&cells)?)?;
    let curve = out.join("rmse_vs_noise.csv");
    write_atomic(&curve, &curve_csv(&cells)?)?;

    let manifest_path = out.join("run_manifest.toml");
    let history = network.as_ref().map(|n| &n.outcome.history).filter(|h| !h.is_empty());
    let m = RunManifest {
        format: RUN_MANIFEST_FORMAT,
        version: env!("CARGO_PKG_VERSION"),
        noise_scale: cfg.noise.scale,
        noise_seed_rule: "noise.seed + level_index * case_count + case_index",
        noise_levels: noise_levels(cfg),
        network_seed: cfg.network.seed,
        shuffle_seed: cfg.network.seed,
        tikhonov_route: if dense { "dense".into() } else { "filter".into() },
        eigenpairs: eigen.as_ref().map_or(0, |e| e.len()),
        training_cases: cases.iter().map(|c| c.name.clone()).collect(),
        final_training_loss: history.and_then(|h| h.last().copied()),
        initial_training_loss: history.and(network.as_ref().map(|n| n.outcome.initial_loss)),
        timings_seconds: clock.timings.clone(),
        failed_cells: cells.iter().filter(|c| c.error.is_some()).count(),
        config: cfg,
    };
    let mut text = toml::to_string(&m).map_err(|e| Error::Config(format!("run manifest: {e}")))?;
    let _ = writeln!(text);
    write_atomic(&manifest_path, text.as_bytes())?;
    log(&format!("wrote {}", summary.display()));

    Ok(ExperimentReport {
        cells,
        out_dir: out,
        summary,
        curve,
        manifest: manifest_path,
        network,
        timings: clock.timings,
    })
}
