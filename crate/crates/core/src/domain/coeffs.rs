use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::{array, Array2};
use serde::{Deserialize, Serialize};

use super::grid::Grid;
use crate::error::{Error, Result};
use crate::linalg::{jacobi_eigen, JacobiOptions};

/// Scalar coefficient function on the closed domain.
#[derive(Clone)]
pub enum ScalarField {
    Constant(f64),
    /// `1 + slope * x`.
    OnePlusX {
        slope: f64,
    },
    /// `1 + scale * |x|²`.
    OnePlusR2 {
        scale: f64,
    },
    /// `offset + Σ cos(x_i)`.
    ThreePlusCos {
        offset: f64,
    },
    Tabulated(Arc<Tabulated>),
    Custom(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(c) => write!(f, "Constant({c})"),
            Self::OnePlusX { slope } => write!(f, "OnePlusX({slope})"),
            Self::OnePlusR2 { scale } => write!(f, "OnePlusR2({scale})"),
            Self::ThreePlusCos { offset } => write!(f, "ThreePlusCos({offset})"),
            Self::Tabulated(t) => write!(f, "Tabulated({:?})", t.source),
            Self::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl ScalarField {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::OnePlusX { slope } => 1.0 + slope * x[0],
            Self::OnePlusR2 { scale } => 1.0 + scale * x.iter().map(|v| v * v).sum::<f64>(),
            Self::ThreePlusCos { offset } => offset + x.iter().map(|v| v.cos()).sum::<f64>(),
            Self::Tabulated(t) => t.eval(x),
            Self::Custom(f) => f(x),
        }
    }

    pub fn from_spec(spec: &FieldSpec, base: &Path) -> Result<Self> {
        Ok(match spec {
            FieldSpec::Constant { value } => Self::Constant(*value),
            FieldSpec::OnePlusX { slope } => Self::OnePlusX { slope: *slope },
            FieldSpec::OnePlusR2 { scale } => Self::OnePlusR2 { scale: *scale },
            FieldSpec::ThreePlusCos { offset } => Self::ThreePlusCos { offset: *offset },
            FieldSpec::Tabulated { path } => {
                let p = if path.is_absolute() {
                    path.clone()
                } else {
                    base.join(path)
                };
                Self::Tabulated(Arc::new(Tabulated::from_csv(&p)?))
            }
        })
    }
}

fn one() -> f64 {
    1.0
}

fn three() -> f64 {
    3.0
}

/// Configuration form of a [`ScalarField`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant {
        value: f64,
    },
    OnePlusX {
        #[serde(default = "one")]
        slope: f64,
    },
    OnePlusR2 {
        #[serde(default = "one")]
        scale: f64,
    },
    ThreePlusCos {
        #[serde(default = "three")]
        offset: f64,
    },
    Tabulated {
        path: PathBuf,
    },
}

/// Values on a regular lattice covering the closed domain, interpolated
/// (bi)linearly.
#[derive(Debug, Clone)]
pub struct Tabulated {
    source: PathBuf,
    xs: Vec<f64>,
    ys: Vec<f64>,
    // values[iy * xs.len() + ix]
    values: Vec<f64>,
}

impl Tabulated {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let ny = ys.len().max(1);
        if xs.len() < 2 || values.len() != xs.len() * ny || ys.len() == 1 {
            return Err(Error::dimension(
                "tabulated coefficient needs a full lattice with at least 2 nodes per axis",
            ));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) || ys.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain(
                "tabulated lattice coordinates must increase strictly",
            ));
        }
        Ok(Self {
            source: PathBuf::new(),
            xs,
            ys,
            values,
        })
    }

    /// Columns `x,value` or `x,y,value` with a header row.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr =
            csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
        let width = rdr
            .headers()
            .map_err(|e| Error::format(path, e.to_string()))?
            .len();
        if width != 2 && width != 3 {
            return Err(Error::format(
                path,
                format!("expected 2 or 3 columns, found {width}"),
            ));
        }
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::format(path, e.to_string()))?;
            let row = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::format(path, e.to_string()))?;
            rows.push(row);
        }
        let uniq = |col: usize| {
            let mut v: Vec<f64> = rows.iter().map(|r| r[col]).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let xs = uniq(0);
        let ys = if width == 3 { uniq(1) } else { Vec::new() };
        let mut values = vec![f64::NAN; xs.len() * ys.len().max(1)];
        for r in &rows {
            let ix = xs.partition_point(|&v| v < r[0]);
            let iy = if width == 3 {
                ys.partition_point(|&v| v < r[1])
            } else {
                0
            };
            values[iy * xs.len() + ix] = r[width - 1];
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::format(path, "rows do not form a complete lattice"));
        }
        let mut t = Self::new(xs, ys, values).map_err(|e| Error::format(path, e.to_string()))?;
        t.source = path.to_path_buf();
        Ok(t)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let locate = |axis: &[f64], v: f64| -> (usize, f64) {
            let i = axis.partition_point(|&a| a <= v).clamp(1, axis.len() - 1) - 1;
            let w = ((v - axis[i]) / (axis[i + 1] - axis[i])).clamp(0.0, 1.0);
            (i, w)
        };
        let (ix, wx) = locate(&self.xs, x[0]);
        let nx = self.xs.len();
        let row = |iy: usize| {
            let r = &self.values[iy * nx..];
            (1.0 - wx) * r[ix] + wx * r[ix + 1]
        };
        if self.ys.is_empty() {
            row(0)
        } else {
            let (iy, wy) = locate(&self.ys, x[1]);
            (1.0 - wy) * row(iy) + wy * row(iy + 1)
        }
    }
}

/// Scalar (`axes.len() == 1`) or diagonal-matrix diffusion coefficient.
#[derive(Debug, Clone)]
pub struct Diffusion {
    pub axes: Vec<ScalarField>,
}

impl Diffusion {
    pub fn scalar(f: ScalarField) -> Self {
        Self { axes: vec![f] }
    }

    pub fn diagonal(axes: Vec<ScalarField>) -> Self {
        Self { axes }
    }

    pub fn along(&self, axis: usize) -> &ScalarField {
        if self.axes.len() == 1 {
            &self.axes[0]
        } else {
            &self.axes[axis]
        }
    }
}

/// Coefficients of the weakly coupled system: one diffusion per component
/// plus a constant coupling matrix.
#[derive(Debug, Clone)]
pub struct WeakCoefficients {
    pub diffusion: Vec<Diffusion>,
    pub coupling: Array2<f64>,
}

impl WeakCoefficients {
    pub fn new(diffusion: Vec<Diffusion>, coupling: Array2<f64>) -> Result<Self> {
        let k = diffusion.len();
        if k == 0 || coupling.dim() != (k, k) {
            return Err(Error::dimension(format!(
                "{k} diffusion coefficients need a {k}x{k} coupling matrix, got {:?}",
                coupling.dim()
            )));
        }
        Ok(Self {
            diffusion,
            coupling,
        })
    }

    pub fn components(&self) -> usize {
        self.diffusion.len()
    }

    /// Two components with `A = B = 1 + x` (or the given fields) and the
    /// coupling `[[1, -1], [-1, 1]]`.
    pub fn paper_pair(a: Diffusion, b: Diffusion) -> Self {
        Self {
            diffusion: vec![a, b],
            coupling: array![[1.0, -1.0], [-1.0, 1.0]],
        }
    }
}

/// Fourth-order tensor `a[i][j][k][l]` for d = 2.
pub type Tensor4 = [[[[f64; 2]; 2]; 2]; 2];

#[derive(Clone)]
pub enum TensorField {
    IsotropicLame {
        mu: ScalarField,
        lambda: ScalarField,
    },
    Custom(Arc<dyn Fn(&[f64]) -> Tensor4 + Send + Sync>),
}

impl fmt::Debug for TensorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::IsotropicLame { mu, lambda } => write!(f, "IsotropicLame({mu:?}, {lambda:?})"),
            Self::Custom(_) => write!(f, "Custom"),
        }
    }
}

fn delta(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        0.0
    }
}

impl TensorField {
    pub fn eval(&self, x: &[f64]) -> Tensor4 {
        match self {
            Self::IsotropicLame { mu, lambda } => {
                let (m, l) = (mu.eval(x), lambda.eval(x));
                let mut a = [[[[0.0; 2]; 2]; 2]; 2];
                for i in 0..2 {
                    for j in 0..2 {
                        for k in 0..2 {
                            for q in 0..2 {
                                a[i][j][k][q] = m
                                    * (delta(i, k) * delta(j, q) + delta(i, q) * delta(j, k))
                                    + l * delta(i, j) * delta(k, q);
                            }
                        }
                    }
                }
                a
            }
            Self::Custom(f) => f(x),
        }
    }
}

/// Coefficients of the strongly coupled system in two dimensions.
#[derive(Debug, Clone)]
pub struct StrongCoefficients {
    pub tensor: TensorField,
    pub coupling: Array2<f64>,
}

impl StrongCoefficients {
    pub fn isotropic_lame(mu: f64, lambda: f64, coupling: Array2<f64>) -> Self {
        Self {
            tensor: TensorField::IsotropicLame {
                mu: ScalarField::Constant(mu),
                lambda: ScalarField::Constant(lambda),
            },
            coupling,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assumption {
    Ellipticity,
    CouplingSymmetry,
    CouplingPsd,
    TensorSymmetry,
    TensorStability,
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ellipticity => "uniform ellipticity",
            Self::CouplingSymmetry => "coupling symmetry",
            Self::CouplingPsd => "coupling positive semidefinite",
            Self::TensorSymmetry => "tensor full symmetry",
            Self::TensorStability => "tensor stability",
        })
    }
}

#[derive(Debug, Clone)]
pub struct AssumptionCheck {
    pub assumption: Assumption,
    pub passed: bool,
    /// The sampled quantity the verdict is based on.
    pub value: f64,
    pub location: String,
}

#[derive(Debug, Clone)]
pub struct CoefficientReport {
    pub checks: Vec<AssumptionCheck>,
    /// Minimum of the sampled quadratic forms.
    pub kappa: f64,
    pub coupling_min_eigenvalue: f64,
}

impl CoefficientReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, a: Assumption) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.assumption == a)
    }

    /// The first failed assumption as a validation error.
    pub fn into_result(self) -> Result<Self> {
        if let Some(c) = self.checks.iter().find(|c| !c.passed) {
            return Err(Error::Validation {
                assumption: c.assumption.to_string(),
                location: c.location.clone(),
                detail: format!("sampled value {:e}", c.value),
            });
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy)]
pub enum CoefficientsRef<'a> {
    Weak(&'a WeakCoefficients),
    Strong(&'a StrongCoefficients),
}

const SYMMETRY_TOL: f64 = 1e-13;
const PSD_TOL: f64 = 1e-12;

/// Closed-lattice nodes (boundary included) and the cell midpoints between them.
pub fn sample_points(grid: &Grid) -> Vec<Vec<f64>> {
    let line = |n: usize| -> Vec<f64> {
        let h = 1.0 / (n + 1) as f64;
        (0..=2 * (n + 1)).map(|i| i as f64 * 0.5 * h).collect()
    };
    let xs = line(grid.nx());
    if grid.dim() == 1 {
        return xs.into_iter().map(|x| vec![x]).collect();
    }
    let ys = line(grid.ny());
    let mut out = Vec::with_capacity(xs.len() * ys.len());
    for &y in &ys {
        for &x in &xs {
            out.push(vec![x, y]);
        }
    }
    out
}

fn fmt_point(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v:.6}")).collect();
    format!("x=({})", parts.join(", "))
}

fn coupling_checks(c: &Array2<f64>, checks: &mut Vec<AssumptionCheck>) -> f64 {
    let n = c.nrows();
    let scale = c
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let mut worst = (0.0f64, 0, 0);
    for i in 0..n {
        for j in 0..n {
            let d = (c[[i, j]] - c[[j, i]]).abs();
            if d > worst.0 {
                worst = (d, i, j);
            }
        }
    }
    let symmetric = worst.0 <= SYMMETRY_TOL * scale;
    checks.push(AssumptionCheck {
        assumption: Assumption::CouplingSymmetry,
        passed: symmetric,
        value: worst.0,
        location: format!("coupling entry ({}, {})", worst.1, worst.2),
    });
    let sym = (c + &c.t()) * 0.5;
    let min_eig = jacobi_eigen(sym.view(), JacobiOptions::default())
        .map(|e| e.values[0])
        .unwrap_or(f64::NAN);
    checks.push(AssumptionCheck {
        assumption: Assumption::CouplingPsd,
        passed: symmetric && min_eig >= -PSD_TOL * scale,
        value: min_eig,
        location: "coupling matrix".into(),
    });
    min_eig
}

pub fn validate_weak(grid: &Grid, coeffs: &WeakCoefficients) -> CoefficientReport {
    let mut checks = Vec::new();
    let mut kappa = f64::INFINITY;
    let mut at = String::new();
    for x in sample_points(grid) {
        for (k, d) in coeffs.diffusion.iter().enumerate() {
            for axis in 0..grid.dim() {
                let v = d.along(axis).eval(&x);
                if !(v >= kappa) {
                    kappa = v;
                    at = format!("component {k}, axis {axis}, {}", fmt_point(&x));
                }
            }
        }
    }
    checks.push(AssumptionCheck {
        assumption: Assumption::Ellipticity,
        passed: kappa > 0.0,
        value: kappa,
        location: at,
    });
    let min_eig = coupling_checks(&coeffs.coupling, &mut checks);
    CoefficientReport {
        checks,
        kappa,
        coupling_min_eigenvalue: min_eig,
    }
}

/// Orthonormal basis of symmetric 2x2 matrices.
fn sym_basis() -> [[[f64; 2]; 2]; 3] {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    [
        [[1.0, 0.0], [0.0, 0.0]],
        [[0.0, 0.0], [0.0, 1.0]],
        [[0.0, r], [r, 0.0]],
    ]
}

/// Smallest value of `𝔸e·e` over symmetric `e` with `|e| = 1`.
pub fn tensor_stability(a: &Tensor4) -> f64 {
    let basis = sym_basis();
    let mut g = Array2::<f64>::zeros((3, 3));
    for (p, ep) in basis.iter().enumerate() {
        for (q, eq) in basis.iter().enumerate() {
            let mut s = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        for l in 0..2 {
                            s += a[i][j][k][l] * eq[k][l] * ep[i][j];
                        }
                    }
                }
            }
            g[[p, q]] = s;
        }
    }
    let g = (&g + &g.t()) * 0.5;
    jacobi_eigen(g.view(), JacobiOptions::default())
        .map(|e| e.values[0])
        .unwrap_or(f64::NAN)
}

pub fn validate_strong(grid: &Grid, coeffs: &StrongCoefficients) -> CoefficientReport {
    let mut checks = Vec::new();
    let mut sym_defect = (0.0f64, String::new());
    let mut kappa = (f64::INFINITY, String::new());
    for x in sample_points(grid) {
        let a = coeffs.tensor.eval(&x);
        let mut scale = 0.0f64;
        let mut defect = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        let v = a[i][j][k][l];
                        scale = scale.max(v.abs());
                        defect = defect
                            .max((v - a[j][i][k][l]).abs())
                            .max((v - a[k][l][i][j]).abs());
                    }
                }
            }
        }
        let rel = defect / scale.max(f64::MIN_POSITIVE);
        if rel > sym_defect.0 || sym_defect.1.is_empty() {
            sym_defect = (rel, fmt_point(&x));
        }
        let s = tensor_stability(&a);
        if !(s >= kappa.0) {
            kappa = (s, fmt_point(&x));
        }
    }
    let symmetric = sym_defect.0 <= SYMMETRY_TOL;
    checks.push(AssumptionCheck {
        assumption: Assumption::TensorSymmetry,
        passed: symmetric,
        value: sym_defect.0,
        location: sym_defect.1,
    });
    checks.push(AssumptionCheck {
        assumption: Assumption::TensorStability,
        passed: kappa.0 > 0.0,
        value: kappa.0,
        location: kappa.1,
    });
    let min_eig = coupling_checks(&coeffs.coupling, &mut checks);
    CoefficientReport {
        checks,
        kappa: kappa.0,
        coupling_min_eigenvalue: min_eig,
    }
}

pub fn validate_coefficients(grid: &Grid, coeffs: CoefficientsRef<'_>) -> CoefficientReport {
    match coeffs {
        CoefficientsRef::Weak(w) => validate_weak(grid, w),
        CoefficientsRef::Strong(s) => validate_strong(grid, s),
    }
}
