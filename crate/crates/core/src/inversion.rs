//! Classical backward solvers: eigen-expansion inversion, truncated
//! spectrum and Tikhonov regularization of the final-time map.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::{Field, Grid};
use crate::error::{Error, Result};
use crate::l1fdm::{L1Solver, TimeGrid};
use crate::linalg::Cholesky;
use crate::spectral::{check_alpha, EigenSystem};

/// Largest per-mode amplification `1/E_{α,1}(-λ_n T^α)` the inversion accepts.
pub const AMPLIFICATION_LIMIT: f64 = 1e15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Provenance {
    Spectral,
    /// Columns computed by L1 time stepping of the unit vectors.
    FdmColumns {
        n_steps: usize,
    },
}

/// Matrix of the map `u_0 ↦ u(T)` on component-major stacked unknowns.
#[derive(Debug, Clone)]
pub struct ForwardMap {
    matrix: Array2<f64>,
    alpha: f64,
    t_final: f64,
    provenance: Provenance,
    grid: Grid,
    components: usize,
}

impl ForwardMap {
    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn apply(&self, u0: &Field) -> Result<Field> {
        u0.check_compatible(&self.grid, self.components)?;
        Field::from_flat(
            self.grid,
            self.components,
            self.matrix.dot(&u0.flat()).view(),
        )
    }
}

pub fn build_forward_map(
    es: &EigenSystem,
    alpha: f64,
    t_final: f64,
    provenance: Provenance,
) -> Result<ForwardMap> {
    check_alpha(alpha)?;
    if !(t_final > 0.0) {
        return Err(Error::precondition(format!(
            "final time {t_final} must be positive"
        )));
    }
    let (grid, kc) = (*es.grid(), es.components());
    let matrix = match provenance {
        Provenance::Spectral => {
            let e = es.decay_factors(alpha, t_final)?;
            let q = es.vectors();
            let mut qe = q.clone();
            for (mut col, &en) in qe.columns_mut().into_iter().zip(&e) {
                col *= en;
            }
            qe.dot(&q.t())
        }
        Provenance::FdmColumns { n_steps } => {
            let n = es.len();
            let units: Vec<Field> = (0..n)
                .map(|j| {
                    let mut v = Array1::zeros(n);
                    v[j] = 1.0;
                    Field::from_flat(grid, kc, v.view())
                })
                .collect::<Result<_>>()?;
            let solver = L1Solver::new(es.operator(), alpha, TimeGrid::new(t_final, n_steps)?)?;
            let cols = solver.solve_batch(&units)?;
            let mut m = Array2::zeros((n, n));
            for (j, c) in cols.iter().enumerate() {
                m.column_mut(j).assign(&c.flat());
            }
            m
        }
    };
    Ok(ForwardMap {
        matrix,
        alpha,
        t_final,
        provenance,
        grid,
        components: kc,
    })
}

/// `u_0 = Σ_{n < cutoff} (u_1, φ_n) / E_{α,1}(-λ_n T^α) φ_n`.
pub fn backward_spectral(
    es: &EigenSystem,
    alpha: f64,
    t_final: f64,
    u1: &Field,
    cutoff: Option<usize>,
) -> Result<Field> {
    let cutoff = check_cutoff(es, cutoff)?;
    let e = es.decay_factors(alpha, t_final)?;
    let mut c = es.coefficients(u1)?;
    for n in 0..es.len() {
        if n < cutoff {
            let amp = 1.0 / e[n];
            if !(amp <= AMPLIFICATION_LIMIT) {
                return Err(Error::ModeOverflow {
                    mode: n + 1,
                    amplification: amp,
                    limit: AMPLIFICATION_LIMIT,
                });
            }
            c[n] *= amp;
        } else {
            c[n] = 0.0;
        }
    }
    es.synthesize(c.view())
}

fn check_cutoff(es: &EigenSystem, cutoff: Option<usize>) -> Result<usize> {
    let cutoff = cutoff.unwrap_or(es.len());
    if cutoff == 0 || cutoff > es.len() {
        return Err(Error::precondition(format!(
            "cutoff {cutoff} outside 1..={}",
            es.len()
        )));
    }
    Ok(cutoff)
}

/// Smallest cutoff whose data residual `(Σ_{n ≥ cutoff} (u_1, φ_n)²)^{1/2}`
/// is at most `factor * noise`, limited to modes below the amplification
/// guard.
pub fn truncation_by_discrepancy(
    es: &EigenSystem,
    alpha: f64,
    t_final: f64,
    u1: &Field,
    noise: f64,
    factor: f64,
) -> Result<usize> {
    let e = es.decay_factors(alpha, t_final)?;
    let admissible = e
        .iter()
        .take_while(|&&v| 1.0 / v <= AMPLIFICATION_LIMIT)
        .count()
        .max(1);
    let c = es.coefficients(u1)?;
    let target = factor * noise;
    let mut tail: f64 = c.iter().skip(admissible).map(|v| v * v).sum();
    let mut cutoff = admissible;
    while cutoff > 1 {
        let next = tail + c[cutoff - 1].powi(2);
        if next.sqrt() > target {
            break;
        }
        tail = next;
        cutoff -= 1;
    }
    Ok(cutoff)
}

/// How ε is chosen for Tikhonov regularization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum RegularizationChoice {
    Fixed {
        epsilon: f64,
    },
    /// Bisect ε until `‖K u_0 − u_1‖ ≈ factor · noise_estimate`, norms
    /// being the h-weighted discrete L² norm.
    Discrepancy {
        noise_estimate: f64,
        factor: f64,
    },
}

pub const DEFAULT_DISCREPANCY_FACTOR: f64 = 1.1;

impl RegularizationChoice {
    pub fn discrepancy(noise_estimate: f64) -> Self {
        Self::Discrepancy {
            noise_estimate,
            factor: DEFAULT_DISCREPANCY_FACTOR,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Self::Fixed { epsilon } if !(epsilon > 0.0) => {
                Err(Error::precondition(format!("epsilon {epsilon} must be positive")))
            }
            Self::Discrepancy { noise_estimate, factor } if !(noise_estimate >= 0.0) || !(factor >= 1.0) => {
                Err(Error::precondition(format!(
                    "discrepancy needs noise_estimate >= 0 and factor >= 1, got {noise_estimate}, {factor}"
                )))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TikhonovResult {
    pub field: Field,
    pub epsilon: f64,
    pub residual: f64,
}

// ‖K‖ ≤ 1, so KᵀK + εI stays numerically definite down to this ε
const EPS_LOW: f64 = 1e-14;
const EPS_HIGH: f64 = 1e2;
const BISECTION_STEPS: usize = 80;

/// Shared ε selection: `solve(ε)` returns a candidate and its residual.
/// Yields the chosen candidate, ε and residual.
fn select_epsilon<T>(
    reg: RegularizationChoice,
    mut solve: impl FnMut(f64) -> Result<(T, f64)>,
) -> Result<(T, f64, f64)> {
    reg.validate()?;
    match reg {
        RegularizationChoice::Fixed { epsilon } => {
            let (field, residual) = solve(epsilon)?;
            Ok((field, epsilon, residual))
        }
        RegularizationChoice::Discrepancy {
            noise_estimate,
            factor,
        } => {
            let target = factor * noise_estimate;
            let (lo_f, lo_r) = solve(EPS_LOW)?;
            let (_, hi_r) = solve(EPS_HIGH)?;
            if lo_r >= target {
                if lo_r == target {
                    return Ok((lo_f, EPS_LOW, lo_r));
                }
                return Err(Error::Bracketing {
                    target,
                    low_residual: lo_r,
                    high_residual: hi_r,
                });
            }
            if hi_r < target {
                return Err(Error::Bracketing {
                    target,
                    low_residual: lo_r,
                    high_residual: hi_r,
                });
            }
            let (mut a, mut b) = (EPS_LOW.ln(), EPS_HIGH.ln());
            let mut best = (lo_f, EPS_LOW, lo_r);
            for _ in 0..BISECTION_STEPS {
                let mid = 0.5 * (a + b);
                let eps = mid.exp();
                let (f, r) = solve(eps)?;
                if r <= target {
                    a = mid;
                    best = (f, eps, r);
                    if target - r <= 1e-4 * target {
                        break;
                    }
                } else {
                    b = mid;
                }
            }
            Ok(best)
        }
    }
}

/// Solves `(KᵀK + εI) u_0 = Kᵀ u_1` by dense Cholesky.
pub fn backward_tikhonov(
    fm: &ForwardMap,
    u1: &Field,
    reg: RegularizationChoice,
) -> Result<TikhonovResult> {
    u1.check_compatible(&fm.grid, fm.components)?;
    let k = &fm.matrix;
    let ktk = k.t().dot(k);
    let rhs = k.t().dot(&u1.flat());
    let n = ktk.nrows();
    let (field, epsilon, residual) = select_epsilon(reg, |eps| {
        let mut g = ktk.clone();
        for i in 0..n {
            g[[i, i]] += eps;
        }
        let x = Cholesky::new(g.view())?.solve(&rhs);
        let field = Field::from_flat(fm.grid, fm.components, x.view())?;
        let res = Field::from_flat(fm.grid, fm.components, (k.dot(&x) - u1.flat()).view())?.norm();
        Ok((field, res))
    })?;
    Ok(TikhonovResult {
        field,
        epsilon,
        residual,
    })
}

/// Tikhonov solution through the eigen-expansion,
/// `u_0 = Σ e_n / (e_n² + ε) (u_1, φ_n) φ_n` with `e_n = E_{α,1}(-λ_n T^α)`.
pub fn backward_tikhonov_filter(
    es: &EigenSystem,
    alpha: f64,
    t_final: f64,
    u1: &Field,
    reg: RegularizationChoice,
) -> Result<TikhonovResult> {
    let e = es.decay_factors(alpha, t_final)?;
    let c = es.coefficients(u1)?;
    let ((), epsilon, residual) = select_epsilon(reg, |eps| {
        // residual coefficients: (e_n g_n - 1) c_n = -ε/(e_n² + ε) c_n
        let r2: f64 = e
            .iter()
            .zip(&c)
            .map(|(&v, &cn)| (eps / (v * v + eps) * cn).powi(2))
            .sum();
        Ok(((), r2.sqrt()))
    })?;
    let g = e.mapv(|v| v / (v * v + epsilon));
    Ok(TikhonovResult {
        field: es.synthesize((&c * &g).view())?,
        epsilon,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeRow {
    pub perturbation: f64,
    /// `‖rec(u_1 + p) − rec(u_1)‖`.
    pub error: f64,
    pub ratio: f64,
}

const PROBE_SEED: u64 = 0x5eed;

/// Perturbs the exact data `u_1 = K u_0` by `p` with `‖𝒜p‖ = size` along a
/// fixed pseudo-random direction and reports the extra reconstruction error.
pub fn stability_probe(
    es: &EigenSystem,
    alpha: f64,
    t_final: f64,
    u0: &Field,
    sizes: &[f64],
    cutoff: Option<usize>,
) -> Result<Vec<ProbeRow>> {
    if sizes.iter().any(|&s| !(s > 0.0)) || sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::precondition(
            "perturbation sizes must be positive and ascending",
        ));
    }
    let e = es.decay_factors(alpha, t_final)?;
    let c0 = es.coefficients(u0)?;
    let u1 = es.synthesize((&c0 * &e).view())?;
    let base = backward_spectral(es, alpha, t_final, &u1, cutoff)?;
    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
    let dir = Array1::from_shape_fn(es.len(), |_| StandardNormal.sample(&mut rng));
    let dir_field = es.synthesize(dir.view())?;
    let graph = es.operator().apply(&dir_field)?.norm();
    let mut rows = Vec::with_capacity(sizes.len());
    for &s in sizes {
        let pert = Field::new(
            *es.grid(),
            u1.values() + &(dir_field.values() * (s / graph)),
        )?;
        let rec = backward_spectral(es, alpha, t_final, &pert, cutoff)?;
        let err = Field::new(*es.grid(), rec.values() - base.values())?.norm();
        rows.push(ProbeRow {
            perturbation: s,
            error: err,
            ratio: err / s,
        });
    }
    Ok(rows)
}

/// `max_{n < cutoff} 1 / (λ_n E_{α,1}(-λ_n T^α))`: the smallest constant with
/// `‖u_0‖ ≤ C ‖𝒜 u(T)‖` on the retained modes.
pub fn stability_constant(
    es: &EigenSystem,
    alpha: f64,
    t_final: f64,
    cutoff: Option<usize>,
) -> Result<f64> {
    let cutoff = check_cutoff(es, cutoff)?;
    let e = es.decay_factors(alpha, t_final)?;
    Ok((0..cutoff)
        .map(|n| 1.0 / (es.values()[n] * e[n]))
        .fold(0.0, f64::max))
}
