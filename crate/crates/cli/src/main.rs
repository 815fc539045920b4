use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use fracback_core::harness::{
    evaluate_saved, gen_dataset_with, read_dataset, run_experiment_logged, train_network,
    worker_pool, write_dataset, write_network, ExperimentConfig, DENSE_TIKHONOV_MAX,
};
use fracback_core::inversion::{
    backward_spectral, backward_tikhonov, backward_tikhonov_filter, build_forward_map,
    truncation_by_discrepancy, Provenance, RegularizationChoice, DEFAULT_DISCREPANCY_FACTOR,
};
use fracback_core::io::{read_field_csv, write_atomic, write_field_csv};
use fracback_core::l1fdm::{solve_forward, TimeGrid};
use fracback_core::mlf::{ml_eval, MlfParams};
use fracback_core::neural::{reconstruct, Checkpoint};
use fracback_core::spectral::{propagate_homogeneous, EigenSystem};

#[derive(Parser)]
#[command(name = "fracback", version, about = "Coupled time-fractional diffusion: forward solves and backward reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Paper1d,
    Paper2d,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment configuration (TOML).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration instead of a file.
    #[arg(long)]
    preset: Option<Preset>,
    /// Overrides the network and noise seeds.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ForwardSolver {
    L1,
    Spectral,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackwardMethod {
    /// Full spectral inversion.
    Spectral,
    /// Spectral inversion keeping the first modes.
    Truncated,
    Tikhonov,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate E_{α,β}(-x).
    Mlf {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(required = true, allow_negative_numbers = true)]
        x: Vec<f64>,
    },
    /// Print a preset configuration.
    Config {
        #[arg(long, value_enum)]
        preset: Preset,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Eigenvalues of the assembled operator.
    Eigen {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Number of eigenvalues printed.
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// Writes all eigenvalues as CSV.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Advance an initial value (CSV) to the final time.
    Forward {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value = "l1")]
        solver: ForwardSolver,
    },
    /// Generate the training dataset.
    GenDataset {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Train the network on a generated dataset.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Defaults to `<out>/dataset`.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Reconstruct an initial value from an observation with a classical method.
    Backward {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum)]
        method: BackwardMethod,
        /// Fixed Tikhonov parameter.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Number of modes kept by truncated inversion.
        #[arg(long)]
        cutoff: Option<usize>,
        /// Weighted L² norm of the data noise; selects ε or the cutoff by
        /// the discrepancy principle.
        #[arg(long)]
        noise_estimate: Option<f64>,
    },
    /// Apply a trained network to an observation.
    Reconstruct {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Evaluate all methods on a saved dataset and checkpoint.
    Evaluate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Dataset generation, training and evaluation in one run.
    RunExperiment {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn load(args: &ConfigArgs) -> Result<ExperimentConfig> {
    let mut cfg = match (&args.config, args.preset) {
        (Some(p), _) => ExperimentConfig::load(p)?,
        (None, Some(Preset::Paper1d)) => ExperimentConfig::paper_1d("out/paper-1d"),
        (None, Some(Preset::Paper2d)) => ExperimentConfig::paper_2d("out/paper-2d"),
        (None, None) => bail!("give --config FILE or --preset NAME"),
    };
    if let Some(s) = args.seed {
        cfg.network.seed = s;
        cfg.noise.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.output.dir = std::env::current_dir()?.join(o);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn log(msg: &str) {
    eprintln!("{msg}");
}

fn write_values(path: &Path, values: &[f64]) -> Result<()> {
    let mut text = String::from("n,lambda\n");
    for (i, v) in values.iter().enumerate() {
        text.push_str(&format!("{},{v:?}\n", i + 1));
    }
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Mlf { alpha, beta, x } => {
            let p = MlfParams::new(alpha, beta)?;
            for xi in x {
                println!("{xi:?},{:?}", ml_eval(p, xi)?);
            }
        }
        Command::Config { preset, out } => {
            let cfg = match preset {
                Preset::Paper1d => ExperimentConfig::paper_1d(out),
                Preset::Paper2d => ExperimentConfig::paper_2d(out),
            };
            print!("{}", cfg.to_toml()?);
        }
        Command::Eigen { cfg, count, output } => {
            let cfg = load(&cfg)?;
            let setup = cfg.setup()?;
            let es = EigenSystem::with_method(setup.operator, cfg.discretization.eigen_method)?;
            for (i, v) in es.values().iter().take(count).enumerate() {
                println!("{} {v:.12e}", i + 1);
            }
            eprintln!(
                "max relative residual {:e}, orthonormality defect {:e}",
                es.max_relative_residual(),
                es.orthonormality_defect()
            );
            if let Some(p) = output {
                write_values(&p, es.values().as_slice().context("eigenvalues")?)?;
            }
        }
        Command::Forward {
            cfg,
            input,
            output,
            solver,
        } => {
            let cfg = load(&cfg)?;
            let setup = cfg.setup()?;
            let u0 = read_field_csv(&input)?;
            let ut = match solver {
                ForwardSolver::L1 => {
                    let tg = TimeGrid::new(setup.t_final, cfg.discretization.n_steps)?;
                    solve_forward(&setup.operator, setup.alpha, &u0, None, tg, false)?.final_state
                }
                ForwardSolver::Spectral => {
                    let es = EigenSystem::with_method(setup.operator, cfg.discretization.eigen_method)?;
                    propagate_homogeneous(&es, setup.alpha, &u0, &[setup.t_final])?
                        .pop()
                        .context("one time")?
                }
            };
            write_field_csv(&output, &ut)?;
        }
        Command::GenDataset { cfg } => {
            let cfg = load(&cfg)?;
            let setup = cfg.setup()?;
            let ds = worker_pool()?.install(|| gen_dataset_with(&cfg, &setup))?;
            let dir = cfg.output_dir().join("dataset");
            write_dataset(&dir, &ds)?;
            log(&format!("wrote {} samples to {}", ds.samples.len(), dir.display()));
        }
        Command::Train { cfg, dataset } => {
            let cfg = load(&cfg)?;
            let dir = dataset.unwrap_or_else(|| cfg.output_dir().join("dataset"));
            let ds = read_dataset(&dir).with_context(|| format!("reading dataset {}", dir.display()))?;
            let every = (cfg.network.epochs / 20).max(1);
            let trained = train_network(&cfg, &ds, |e, l| {
                if e % every == 0 {
                    log(&format!("epoch {e}: loss {l:e}"));
                }
            })?;
            write_network(&cfg.output_dir(), &trained)?;
            log(&format!("wrote {}", cfg.output_dir().join("network.ckpt").display()));
        }
        Command::Backward {
            cfg,
            input,
            output,
            method,
            epsilon,
            cutoff,
            noise_estimate,
        } => {
            let cfg = load(&cfg)?;
            let setup = cfg.setup()?;
            let obs = read_field_csv(&input)?;
            let es = EigenSystem::with_method(setup.operator.clone(), cfg.discretization.eigen_method)?;
            let (a, t) = (setup.alpha, setup.t_final);
            let rec = match method {
                BackwardMethod::Spectral => backward_spectral(&es, a, t, &obs, None)?,
                BackwardMethod::Truncated => {
                    let n = match (cutoff, noise_estimate) {
                        (Some(n), _) => n,
                        (None, Some(s)) => {
                            truncation_by_discrepancy(&es, a, t, &obs, s, DEFAULT_DISCREPANCY_FACTOR)?
                        }
                        (None, None) => bail!("truncated inversion needs --cutoff or --noise-estimate"),
                    };
                    log(&format!("cutoff {n}"));
                    backward_spectral(&es, a, t, &obs, Some(n))?
                }
                BackwardMethod::Tikhonov => {
                    let reg = match (epsilon, noise_estimate) {
                        (Some(e), _) => RegularizationChoice::Fixed { epsilon: e },
                        (None, Some(s)) => RegularizationChoice::discrepancy(s),
                        (None, None) => bail!("Tikhonov needs --epsilon or --noise-estimate"),
                    };
                    let r = if setup.operator.dim() <= DENSE_TIKHONOV_MAX {
                        let fm = build_forward_map(&es, a, t, Provenance::Spectral)?;
                        backward_tikhonov(&fm, &obs, reg)?
                    } else {
                        backward_tikhonov_filter(&es, a, t, &obs, reg)?
                    };
                    log(&format!("epsilon {:e}, residual {:e}", r.epsilon, r.residual));
                    r.field
                }
            };
            write_field_csv(&output, &rec)?;
        }
        Command::Reconstruct {
            checkpoint,
            input,
            output,
        } => {
            let ck = Checkpoint::read(&checkpoint)?;
            let obs = read_field_csv(&input)?;
            write_field_csv(&output, &reconstruct(&ck.config, &ck.params, &obs)?)?;
        }
        Command::Evaluate {
            cfg,
            dataset,
            checkpoint,
        } => {
            let cfg = load(&cfg)?;
            let dir = dataset.unwrap_or_else(|| cfg.output_dir().join("dataset"));
            let ds = read_dataset(&dir).with_context(|| format!("reading dataset {}", dir.display()))?;
            let ck_path = checkpoint.unwrap_or_else(|| cfg.output_dir().join("network.ckpt"));
            let ck = if ck_path.exists() {
                Some(Checkpoint::read(&ck_path)?)
            } else {
                None
            };
            let rep = evaluate_saved(&cfg, &ds, ck, &mut log)?;
            print!("{}", std::fs::read_to_string(&rep.curve)?);
        }
        Command::RunExperiment { cfg } => {
            let cfg = load(&cfg)?;
            let rep = run_experiment_logged(&cfg, &mut log)?;
            print!("{}", std::fs::read_to_string(&rep.curve)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
