use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::domain::{
    assemble_strong, assemble_weak, CoupledOperator, Diffusion, FieldSpec, Grid, ScalarField,
    StrongCoefficients, WeakCoefficients,
};
use crate::error::{Error, Result};
use crate::linalg::EigenMethod;
use crate::neural::{NetworkConfig, TrainOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    Weak,
    Strong,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    #[serde(default = "weak")]
    pub kind: SystemKind,
    pub dimension: usize,
    pub alpha: f64,
    pub t_final: f64,
    /// Row-major K×K coupling matrix C.
    pub coupling: Vec<Vec<f64>>,
    /// One scalar coefficient per component (weak systems).
    #[serde(default)]
    pub diffusion: Vec<FieldSpec>,
    /// Lamé parameters (strong systems).
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default)]
    pub lambda: Option<f64>,
}

fn weak() -> SystemKind {
    SystemKind::Weak
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationSection {
    pub nx: usize,
    #[serde(default)]
    pub ny: Option<usize>,
    /// L1 time steps on [0, T].
    pub n_steps: usize,
    #[serde(default)]
    pub eigen_method: EigenMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipe {
    /// Products of sines `sin(iπx)` (1D) or `sin(iπx)sin(jπy)` (2D) per
    /// component, every index in `1..=max_mode`.
    SinePairs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    #[serde(default = "sine_pairs")]
    pub recipe: Recipe,
    #[serde(default = "five")]
    pub max_mode: usize,
    /// Right-hand sides advanced together by one L1 solve.
    #[serde(default = "ten")]
    pub solve_chunk: usize,
}

fn sine_pairs() -> Recipe {
    Recipe::SinePairs
}
fn five() -> usize {
    5
}
fn ten() -> usize {
    10
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseScale {
    /// σ = δ · max|u_T|.
    #[default]
    Relative,
    /// σ = δ.
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    /// Fractions in [0, 1); clean data is always evaluated as well.
    #[serde(default)]
    pub levels: Vec<f64>,
    #[serde(default)]
    pub scale: NoiseScale,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    #[serde(default = "epochs")]
    pub epochs: usize,
    #[serde(default = "batch")]
    pub batch_size: usize,
    #[serde(default = "lr")]
    pub learning_rate: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "three")]
    pub conv1_kernel: usize,
    #[serde(default = "three")]
    pub conv2_kernel: usize,
    /// Defaults to `min(256, 2M)`.
    #[serde(default)]
    pub hidden: Option<usize>,
    #[serde(default)]
    pub use_bias: bool,
    #[serde(default = "onef")]
    pub input_scale: f64,
    #[serde(default = "onef")]
    pub output_scale: f64,
}

fn epochs() -> usize {
    3000
}
fn batch() -> usize {
    5
}
fn lr() -> f64 {
    1e-3
}
fn three() -> usize {
    3
}
fn onef() -> f64 {
    1.0
}

impl Default for NetworkSection {
    fn default() -> Self {
        toml::from_str("").expect("all network fields have defaults")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Tikhonov,
    SpectralTruncated,
    Neural,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Tikhonov, Method::SpectralTruncated, Method::Neural];

    pub fn name(self) -> &'static str {
        match self {
            Method::Tikhonov => "tikhonov",
            Method::SpectralTruncated => "spectral_truncated",
            Method::Neural => "neural",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TikhonovRoute {
    /// Dense normal equations up to [`DENSE_TIKHONOV_MAX`] unknowns, the
    /// eigenbasis filter above.
    #[default]
    Auto,
    Dense,
    Filter,
}

pub const DENSE_TIKHONOV_MAX: usize = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InversionSection {
    #[serde(default = "all_methods")]
    pub methods: Vec<Method>,
    /// ε on noise-free data, where the discrepancy principle has no target.
    #[serde(default = "clean_eps")]
    pub clean_epsilon: f64,
    /// Spectral cutoff on noise-free data; all modes when absent.
    #[serde(default)]
    pub clean_cutoff: Option<usize>,
    #[serde(default = "factor")]
    pub discrepancy_factor: f64,
    #[serde(default)]
    pub tikhonov_route: TikhonovRoute,
    /// Training samples evaluated, spread evenly over the dataset; all when
    /// absent.
    #[serde(default)]
    pub training_cases: Option<usize>,
}

fn all_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}
fn clean_eps() -> f64 {
    1e-12
}
fn factor() -> f64 {
    crate::inversion::DEFAULT_DISCREPANCY_FACTOR
}

impl Default for InversionSection {
    fn default() -> Self {
        toml::from_str("").expect("all inversion fields have defaults")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    #[serde(default = "yes")]
    pub write_reconstructions: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemSection,
    pub discretization: DiscretizationSection,
    pub dataset: DatasetSection,
    #[serde(default = "no_noise")]
    pub noise: NoiseSection,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub inversion: InversionSection,
    pub output: OutputSection,
    /// Directory that relative paths inside the file resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn no_noise() -> NoiseSection {
    NoiseSection {
        levels: Vec::new(),
        scale: NoiseScale::Relative,
        seed: 0,
    }
}

/// The assembled discrete problem an experiment runs on.
#[derive(Debug, Clone)]
pub struct SystemSetup {
    pub grid: Grid,
    pub operator: Arc<CoupledOperator>,
    pub alpha: f64,
    pub t_final: f64,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: Self =
            toml::from_str(text).map_err(|e| Error::Config(format!("experiment config: {e}")))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("serializing config: {e}")))
    }

    /// The 1D system: A = B = 1 + x, C = [[1, -1], [-1, 1]], α = 0.2, T = 1,
    /// 150 interior points.
    pub fn paper_1d(out: impl Into<PathBuf>) -> Self {
        let text = r#"
            [system]
            dimension = 1
            alpha = 0.2
            t_final = 1.0
            coupling = [[1.0, -1.0], [-1.0, 1.0]]
            diffusion = [{ family = "one_plus_x" }, { family = "one_plus_x" }]
            [discretization]
            nx = 150
            n_steps = 2048
            [dataset]
            [noise]
            levels = [0.01, 0.05, 0.1]
            seed = 1000
            [network]
            [output]
            dir = "."
        "#;
        let mut cfg = Self::from_toml(text, Path::new(".")).expect("preset is valid");
        cfg.output.dir = out.into();
        cfg
    }

    /// The 2D system on a 64×64 interior grid: A = 1 + x² + y²,
    /// B = 3 + cos x + cos y, α = 0.4, T = 1.
    pub fn paper_2d(out: impl Into<PathBuf>) -> Self {
        let text = r#"
            [system]
            dimension = 2
            alpha = 0.4
            t_final = 1.0
            coupling = [[1.0, -1.0], [-1.0, 1.0]]
            diffusion = [{ family = "one_plus_r2" }, { family = "three_plus_cos" }]
            [discretization]
            nx = 64
            ny = 64
            n_steps = 512
            [dataset]
            [noise]
            levels = [0.01, 0.05, 0.1]
            seed = 2000
            [network]
            epochs = 150
            batch_size = 25
            [inversion]
            training_cases = 25
            [output]
            dir = "."
        "#;
        let mut cfg = Self::from_toml(text, Path::new(".")).expect("preset is valid");
        cfg.output.dir = out.into();
        cfg
    }

    pub fn components(&self) -> usize {
        self.system.coupling.len()
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.system;
        let bad = |m: String| Err(Error::Config(m));
        if !(s.alpha > 0.0 && s.alpha < 1.0) {
            return bad(format!("alpha {} must lie in (0, 1)", s.alpha));
        }
        if !(s.t_final > 0.0 && s.t_final.is_finite()) {
            return bad(format!("t_final {} must be positive", s.t_final));
        }
        let k = s.coupling.len();
        if k == 0 || s.coupling.iter().any(|r| r.len() != k) {
            return bad("coupling must be a square, non-empty matrix".into());
        }
        match s.dimension {
            1 => {
                if self.discretization.ny.is_some() {
                    return bad("ny given for a 1D system".into());
                }
            }
            2 => {
                if self.discretization.ny.is_none() {
                    return bad("2D system needs discretization.ny".into());
                }
            }
            d => return bad(format!("dimension {d} must be 1 or 2")),
        }
        match s.kind {
            SystemKind::Weak => {
                if s.diffusion.len() != k {
                    return bad(format!(
                        "{} diffusion coefficients for {k} components",
                        s.diffusion.len()
                    ));
                }
            }
            SystemKind::Strong => {
                if s.dimension != 2 || k != 2 || s.mu.is_none() || s.lambda.is_none() {
                    return bad("strong systems need dimension = 2, two components, mu and lambda".into());
                }
            }
        }
        if self.discretization.n_steps == 0 {
            return bad("n_steps must be positive".into());
        }
        if self.dataset.max_mode == 0 || self.dataset.solve_chunk == 0 {
            return bad("max_mode and solve_chunk must be positive".into());
        }
        if self.dataset.recipe == Recipe::SinePairs && k != 2 {
            return bad("the sine-pair recipe is defined for two components".into());
        }
        if let Some(d) = self.noise.levels.iter().find(|d| !(**d >= 0.0 && **d < 1.0)) {
            return bad(format!("noise level {d} outside [0, 1)"));
        }
        let n = &self.network;
        if n.epochs == 0 || n.batch_size == 0 || !(n.learning_rate > 0.0) {
            return bad("network epochs, batch size and learning rate must be positive".into());
        }
        let inv = &self.inversion;
        if !(inv.clean_epsilon > 0.0) || !(inv.discrepancy_factor >= 1.0) {
            return bad("clean_epsilon must be positive and discrepancy_factor at least 1".into());
        }
        if inv.training_cases == Some(0) || inv.clean_cutoff == Some(0) {
            return bad("training_cases and clean_cutoff must be positive".into());
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        match self.discretization.ny {
            None => Grid::new_1d(self.discretization.nx),
            Some(ny) => Grid::new_2d(self.discretization.nx, ny),
        }
    }

    pub fn coupling(&self) -> Array2<f64> {
        let k = self.components();
        Array2::from_shape_fn((k, k), |(i, j)| self.system.coupling[i][j])
    }

    /// Assembles the operator, validating the coefficients on the grid.
    pub fn setup(&self) -> Result<SystemSetup> {
        let grid = self.grid()?;
        let s = &self.system;
        let op = match s.kind {
            SystemKind::Weak => {
                let diffusion = s
                    .diffusion
                    .iter()
                    .map(|spec| ScalarField::from_spec(spec, &self.base_dir).map(Diffusion::scalar))
                    .collect::<Result<Vec<_>>>()?;
                assemble_weak(&grid, &WeakCoefficients::new(diffusion, self.coupling())?)?
            }
            SystemKind::Strong => {
                let c = StrongCoefficients::isotropic_lame(
                    s.mu.unwrap_or_default(),
                    s.lambda.unwrap_or_default(),
                    self.coupling(),
                );
                assemble_strong(&grid, &c)?
            }
        };
        Ok(SystemSetup {
            grid,
            operator: Arc::new(op),
            alpha: s.alpha,
            t_final: s.t_final,
        })
    }

    pub fn network_config(&self, grid: &Grid) -> Result<NetworkConfig> {
        let n = &self.network;
        let mut cfg = NetworkConfig::for_grid(self.components(), grid, n.seed)?;
        cfg.conv1_kernel = n.conv1_kernel;
        cfg.conv2_kernel = n.conv2_kernel;
        if let Some(h) = n.hidden {
            cfg.fc_widths[0] = h;
        }
        cfg.use_bias = n.use_bias;
        cfg.input_scale = n.input_scale;
        cfg.output_scale = n.output_scale;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn train_options(&self) -> TrainOptions {
        let n = &self.network;
        TrainOptions {
            epochs: n.epochs,
            batch_size: n.batch_size,
            learning_rate: n.learning_rate,
            seed: n.seed,
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        if self.output.dir.is_absolute() {
            self.output.dir.clone()
        } else {
            self.base_dir.join(&self.output.dir)
        }
    }
}
