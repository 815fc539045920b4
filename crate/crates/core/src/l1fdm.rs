//! L1 finite-difference time stepping for `∂_t^α (u - u_0) + 𝒜u = F`.

use crate::domain::{CoupledOperator, Field, Profile};
use crate::error::{Error, Result};
use crate::linalg::BandedCholesky;
use crate::mlf::rgamma;
use crate::spectral::{check_alpha, propagate_homogeneous, EigenSystem, SourceSpec};

/// Uniform time grid on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TimeGrid {
    t_final: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, n_steps: usize) -> Result<Self> {
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::domain(format!(
                "final time {t_final} must be positive"
            )));
        }
        if n_steps == 0 {
            return Err(Error::domain("need at least one time step"));
        }
        Ok(Self { t_final, n_steps })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn tau(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        if n == self.n_steps {
            self.t_final
        } else {
            n as f64 * self.tau()
        }
    }
}

/// `b_j = (j+1)^{1-α} - j^{1-α}`.
#[derive(Debug, Clone)]
pub struct L1Weights {
    alpha: f64,
    b: Vec<f64>,
}

impl L1Weights {
    pub fn new(alpha: f64, count: usize) -> Result<Self> {
        check_alpha(alpha)?;
        let e = 1.0 - alpha;
        let b = (0..count.max(1))
            .map(|j| ((j + 1) as f64).powf(e) - (j as f64).powf(e))
            .collect();
        Ok(Self { alpha, b })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// `c_τ = 1 / (Γ(2-α) τ^α)`.
    pub fn scale(&self, tau: f64) -> f64 {
        rgamma(2.0 - self.alpha) / tau.powf(self.alpha)
    }
}

#[derive(Debug, Clone)]
pub struct ForwardSolution {
    pub final_state: Field,
    /// States at `t_0 = 0, t_1, ..., t_N` when requested.
    pub trajectory: Option<Vec<Field>>,
}

/// Implicit L1 stepper with the shifted operator `c_τ I + 𝒜` factored once.
///
/// Unknowns are reordered to `p * K + k` so that the factor is banded with
/// half-bandwidth about `K * nx`.
pub struct L1Solver<'a> {
    op: &'a CoupledOperator,
    weights: L1Weights,
    grid: TimeGrid,
    c_tau: f64,
    factor: BandedCholesky,
}

impl<'a> L1Solver<'a> {
    pub fn new(op: &'a CoupledOperator, alpha: f64, grid: TimeGrid) -> Result<Self> {
        let weights = L1Weights::new(alpha, grid.n_steps())?;
        let c_tau = weights.scale(grid.tau());
        let (m, kc) = (op.grid().points(), op.components());
        let bw = op.interleaved_bandwidth();
        let a = op.matrix();
        let orig = |i: usize| (i % kc) * m + i / kc;
        let factor = BandedCholesky::from_fn(op.dim(), bw, |i, j| {
            let v = a[[orig(i), orig(j)]];
            if i == j {
                v + c_tau
            } else {
                v
            }
        })?;
        Ok(Self {
            op,
            weights,
            grid,
            c_tau,
            factor,
        })
    }

    pub fn time_grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn to_interleaved(&self, f: &Field, out: &mut [f64], col: usize, nrhs: usize) {
        let kc = self.op.components();
        for (k, row) in f.values().rows().into_iter().enumerate() {
            for (p, &v) in row.iter().enumerate() {
                out[(p * kc + k) * nrhs + col] = v;
            }
        }
    }

    fn from_interleaved(&self, x: &[f64], col: usize, nrhs: usize) -> Result<Field> {
        let (m, kc) = (self.op.grid().points(), self.op.components());
        let mut vals = ndarray::Array2::zeros((kc, m));
        for p in 0..m {
            for k in 0..kc {
                vals[[k, p]] = x[(p * kc + k) * nrhs + col];
            }
        }
        Field::new(*self.op.grid(), vals)
    }

    /// Advances every initial state in `u0s` to the final time with zero source.
    pub fn solve_batch(&self, u0s: &[Field]) -> Result<Vec<Field>> {
        self.run(u0s, None, false).map(|(f, _)| f)
    }

    pub fn solve(
        &self,
        u0: &Field,
        source: Option<&SourceSpec>,
        keep_trajectory: bool,
    ) -> Result<ForwardSolution> {
        let (mut finals, traj) = self.run(std::slice::from_ref(u0), source, keep_trajectory)?;
        Ok(ForwardSolution {
            final_state: finals.pop().expect("one state"),
            trajectory: traj,
        })
    }

    fn run(
        &self,
        u0s: &[Field],
        source: Option<&SourceSpec>,
        keep_trajectory: bool,
    ) -> Result<(Vec<Field>, Option<Vec<Field>>)> {
        let (grid, kc) = (*self.op.grid(), self.op.components());
        for u in u0s {
            u.check_compatible(&grid, kc)?;
        }
        let nrhs = u0s.len();
        if nrhs == 0 {
            return Ok((Vec::new(), keep_trajectory.then(Vec::new)));
        }
        let n = self.op.dim();
        let width = n * nrhs;
        let steps = self.grid.n_steps();
        let b = self.weights.b();
        let mut hist = vec![0.0; (steps + 1) * width];
        for (c, u) in u0s.iter().enumerate() {
            self.to_interleaved(u, &mut hist[..width], c, nrhs);
        }
        let mut fbuf = vec![0.0; width];
        for step in 1..=steps {
            let (past, rest) = hist.split_at_mut(step * width);
            let cur = &mut rest[..width];
            let w0 = b[step - 1];
            for (c, u) in cur.iter_mut().zip(&past[..width]) {
                *c = w0 * u;
            }
            for k in 1..step {
                let d = b[step - k - 1] - b[step - k];
                for (c, u) in cur.iter_mut().zip(&past[k * width..(k + 1) * width]) {
                    *c += d * u;
                }
            }
            cur.iter_mut().for_each(|v| *v *= self.c_tau);
            if let Some(src) = source {
                let f = src.sample(self.grid.time(step), &grid, kc)?;
                for c in 0..nrhs {
                    self.to_interleaved(&f, &mut fbuf, c, nrhs);
                }
                for (c, v) in cur.iter_mut().zip(&fbuf) {
                    *c += v;
                }
            }
            self.factor.solve_many_in_place(cur, nrhs);
            if cur.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("L1 time step {step}")));
            }
        }
        let last = &hist[steps * width..];
        let finals = (0..nrhs)
            .map(|c| self.from_interleaved(last, c, nrhs))
            .collect::<Result<Vec<_>>>()?;
        let traj = if keep_trajectory {
            Some(
                (0..=steps)
                    .map(|s| self.from_interleaved(&hist[s * width..(s + 1) * width], 0, nrhs))
                    .collect::<Result<Vec<_>>>()?,
            )
        } else {
            None
        };
        Ok((finals, traj))
    }
}

pub fn solve_forward(
    op: &CoupledOperator,
    alpha: f64,
    u0: &Field,
    source: Option<&SourceSpec>,
    tg: TimeGrid,
    keep_trajectory: bool,
) -> Result<ForwardSolution> {
    L1Solver::new(op, alpha, tg)?.solve(u0, source, keep_trajectory)
}

#[derive(Debug, Clone)]
pub struct OrderFit {
    pub order: f64,
    pub step_counts: Vec<usize>,
    /// Relative L² error at the final time against the eigen-expansion.
    pub errors: Vec<f64>,
}

/// Least-squares slope of `log(error)` against `log(τ)` over the given step
/// counts, the reference being the eigen-expansion on the same operator.
pub fn convergence_order(
    es: &EigenSystem,
    alpha: f64,
    u0: &Profile,
    t_final: f64,
    step_counts: &[usize],
) -> Result<OrderFit> {
    if step_counts.len() < 3 || step_counts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::precondition("need at least 3 ascending step counts"));
    }
    let grid = *es.grid();
    let field = u0.sample(&grid)?;
    let scale = field.max_abs().max(f64::MIN_POSITIVE);
    let bmax = u0.boundary_max(&grid);
    if bmax > 1e-12 * scale {
        return Err(Error::precondition(format!(
            "initial profile '{}' is {bmax:e} on the boundary; Dirichlet data must vanish",
            u0.name
        )));
    }
    let reference = propagate_homogeneous(es, alpha, &field, &[t_final])?
        .pop()
        .expect("one time");
    let rnorm = reference.norm();
    let mut errors = Vec::with_capacity(step_counts.len());
    for &n in step_counts {
        let tg = TimeGrid::new(t_final, n)?;
        let u = solve_forward(es.operator(), alpha, &field, None, tg, false)?.final_state;
        let diff = Field::new(grid, u.values() - reference.values())?;
        errors.push(diff.norm() / rnorm);
    }
    if errors.iter().any(|&e| !(e > 1e-13)) {
        return Err(Error::Convergence {
            method: "temporal order fit",
            detail: format!("errors {errors:?} are at rounding level"),
        });
    }
    let xs: Vec<f64> = step_counts
        .iter()
        .map(|&n| (t_final / n as f64).ln())
        .collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let order = slope(&xs, &ys);
    Ok(OrderFit {
        order,
        step_counts: step_counts.to_vec(),
        errors,
    })
}

pub(crate) fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
