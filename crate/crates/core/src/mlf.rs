//! Two-parameter Mittag-Leffler function `E_{α,β}(-x)` on the negative real
//! axis, for `0 < α ≤ 1` and `β ≥ α`.
//!
//! Evaluation switches between three regimes:
//!
//! * a compensated power series for small arguments, accepted only when it
//!   converges without destructive cancellation;
//! * quadrature of the integral representation
//!   `E_{α,β}(-x) = 1/(απ) ∫_0^∞ r^{(1-β)/α} e^{-r^{1/α}}
//!   (r sin(π(1-β)) + x sin(π(1-β+α))) / (r² + 2rx cos(πα) + x²) dr`,
//!   valid for `0 < α < 1`, `β < 1 + α` (larger `β` is reduced with
//!   `E_{α,β}(z) = (E_{α,β-α}(z) - 1/Γ(β-α)) / z`);
//! * the algebraic asymptotic expansion
//!   `E_{α,β}(-x) ≈ Σ_{k≥1} (-1)^{k+1} x^{-k} / Γ(β - αk)` for large `x`.
//!
//! `α = 1` is handled separately because the asymptotic expansion loses the
//! exponential part there.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quad::{self, QuadOptions};

const SERIES_REL_STOP: f64 = 1e-18;
const SERIES_MAX_TERMS: usize = 500;
/// Largest `max|term| / |sum|` ratio the series may exhibit and still be
/// trusted to ~1e-9 relative accuracy.
const SERIES_MAX_CANCELLATION: f64 = 1e5;
const ASYMPTOTIC_MAX_TERMS: usize = 200;
const ASYMPTOTIC_REL_STOP: f64 = 1e-17;
const ASYMPTOTIC_ACCEPT: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlfParams {
    alpha: f64,
    beta: f64,
}

impl MlfParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::domain(format!("alpha = {alpha} outside (0, 1]")));
        }
        if !(beta >= alpha) || !beta.is_finite() {
            return Err(Error::domain(format!(
                "beta = {beta} must satisfy beta >= alpha = {alpha}"
            )));
        }
        Ok(Self { alpha, beta })
    }

    /// `E_{α,1}`, the per-mode decay profile.
    pub fn standard(alpha: f64) -> Result<Self> {
        Self::new(alpha, 1.0)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Argument thresholds separating the evaluation regimes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlfRegime {
    pub series_cutoff: f64,
    pub asymptotic_cutoff: f64,
    /// Minimum number of asymptotic terms; more are added while they keep
    /// shrinking.
    pub asymptotic_terms: usize,
}

impl Default for MlfRegime {
    fn default() -> Self {
        Self {
            series_cutoff: 5.0,
            asymptotic_cutoff: 50.0,
            asymptotic_terms: 3,
        }
    }
}

impl MlfRegime {
    pub fn new(
        series_cutoff: f64,
        asymptotic_cutoff: f64,
        asymptotic_terms: usize,
    ) -> Result<Self> {
        if !(series_cutoff > 0.0 && asymptotic_cutoff > series_cutoff) {
            return Err(Error::domain(format!(
                "regime cutoffs must satisfy 0 < {series_cutoff} < {asymptotic_cutoff}"
            )));
        }
        if asymptotic_terms == 0 {
            return Err(Error::domain("asymptotic_terms must be >= 1"));
        }
        Ok(Self {
            series_cutoff,
            asymptotic_cutoff,
            asymptotic_terms,
        })
    }
}

/// Which branch produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Closed,
    Series,
    Quadrature,
    Asymptotic,
}

/// A configured evaluator.
#[derive(Debug, Clone, Copy)]
pub struct MittagLeffler {
    pub params: MlfParams,
    pub regime: MlfRegime,
}

impl MittagLeffler {
    pub fn new(params: MlfParams) -> Self {
        Self {
            params,
            regime: MlfRegime::default(),
        }
    }

    pub fn with_regime(params: MlfParams, regime: MlfRegime) -> Self {
        Self { params, regime }
    }

    /// `E_{α,β}(-x)`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        self.eval_traced(x).map(|(v, _)| v)
    }

    pub fn eval_traced(&self, x: f64) -> Result<(f64, Method)> {
        let MlfParams { alpha, beta } = self.params;
        if !(x >= 0.0) || !x.is_finite() {
            return Err(Error::domain(format!(
                "argument x = {x} must be finite and >= 0"
            )));
        }
        if x == 0.0 {
            return Ok((rgamma(beta), Method::Closed));
        }
        if alpha == 1.0 && beta == 1.0 {
            return Ok(((-x).exp(), Method::Closed));
        }
        if x <= self.regime.series_cutoff {
            if let Ok(v) = series_checked(alpha, beta, x) {
                return Ok((v, Method::Series));
            }
        }
        if alpha < 1.0 && x >= self.regime.asymptotic_cutoff {
            if let Some(v) = asymptotic_adaptive(alpha, beta, x, self.regime.asymptotic_terms) {
                return Ok((v, Method::Asymptotic));
            }
        }
        quadrature(self.params, x).map(|v| (v, Method::Quadrature))
    }
}

/// `E_{α,β}(-x)` with the default regime.
pub fn ml_eval(params: MlfParams, x: f64) -> Result<f64> {
    MittagLeffler::new(params).eval(x)
}

/// `d/dt E_{α,1}(-λ t^α) = -λ t^{α-1} E_{α,α}(-λ t^α)`.
pub fn ml_derivative(alpha: f64, lambda: f64, t: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::domain(format!("lambda = {lambda} must be positive")));
    }
    if !(t > 0.0) {
        return Err(Error::domain(format!("t = {t} must be positive")));
    }
    let p = MlfParams::new(alpha, alpha)?;
    let z = lambda * t.powf(alpha);
    Ok(-lambda * t.powf(alpha - 1.0) * ml_eval(p, z)?)
}

/// `∫_0^η t^{α-1} E_{α,α}(-λ t^α) dt = (1 - E_{α,1}(-λ η^α)) / λ`.
///
/// Evaluated as `η^α E_{α,1+α}(-λ η^α)`, which is the same quantity without
/// the cancellation in `1 - E` for small `λ η^α`.
pub fn ml_kernel_integral(alpha: f64, lambda: f64, eta: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::domain(format!("lambda = {lambda} must be positive")));
    }
    if !(eta > 0.0) {
        return Err(Error::domain(format!("eta = {eta} must be positive")));
    }
    let p = MlfParams::new(alpha, 1.0 + alpha)?;
    let eta_a = eta.powf(alpha);
    Ok(eta_a * ml_eval(p, lambda * eta_a)?)
}

/// Reciprocal gamma function, zero at the poles of Γ.
pub fn rgamma(y: f64) -> f64 {
    if y <= 0.0 && y == y.floor() {
        return 0.0;
    }
    if y.abs() < 170.0 {
        1.0 / libm::tgamma(y)
    } else {
        let (lg, sign) = libm::lgamma_r(y);
        sign as f64 * (-lg).exp()
    }
}

/// Power series `Σ (-x)^m / Γ(αm + β)` with Neumaier summation. Fails if it
/// does not converge within the term cap or if cancellation is too severe for
/// the result to be trusted.
pub fn series(params: MlfParams, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::domain(format!("argument x = {x} must be >= 0")));
    }
    series_checked(params.alpha, params.beta, x)
}

fn series_checked(alpha: f64, beta: f64, x: f64) -> Result<f64> {
    let ln_x = x.ln();
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut max_term: f64 = 0.0;
    for m in 0..SERIES_MAX_TERMS {
        let arg = alpha * m as f64 + beta;
        let mag = if arg < 170.0 && m < 300 {
            x.powi(m as i32) * rgamma(arg)
        } else {
            (m as f64 * ln_x - libm::lgamma(arg)).exp()
        };
        let term = if m % 2 == 0 { mag } else { -mag };
        max_term = max_term.max(mag);
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
        let total = sum + comp;
        if m > 0 && mag.abs() < SERIES_REL_STOP * total.abs() {
            if max_term > SERIES_MAX_CANCELLATION * total.abs() {
                return Err(Error::Convergence {
                    method: "Mittag-Leffler series",
                    detail: format!("cancellation ratio {:e} at x = {x}", max_term / total.abs()),
                });
            }
            return Ok(total);
        }
        if !mag.is_finite() {
            break;
        }
    }
    Err(Error::Convergence {
        method: "Mittag-Leffler series",
        detail: format!("no convergence within {SERIES_MAX_TERMS} terms at x = {x}"),
    })
}

/// Truncated asymptotic expansion with exactly `terms` terms:
/// `-Σ_{k=1}^{p} (-x)^{-k} / Γ(β - αk)`.
pub fn asymptotic(params: MlfParams, x: f64, terms: usize) -> f64 {
    let MlfParams { alpha, beta } = params;
    let ln_x = x.ln();
    (1..=terms)
        .map(|k| {
            let t = asymptotic_term(alpha, beta, k, ln_x);
            if k % 2 == 1 {
                t
            } else {
                -t
            }
        })
        .sum()
}

/// `x^{-k} / Γ(β - αk)`, in log space once Γ leaves the f64 range.
fn asymptotic_term(alpha: f64, beta: f64, k: usize, ln_x: f64) -> f64 {
    let y = beta - alpha * k as f64;
    if y.abs() < 170.0 {
        (-(k as f64) * ln_x).exp() * rgamma(y)
    } else if y <= 0.0 && y == y.floor() {
        0.0
    } else {
        let (lg, sign) = libm::lgamma_r(y);
        sign as f64 * (-(k as f64) * ln_x - lg).exp()
    }
}

/// Adds asymptotic terms beyond `min_terms` until they fall below rounding
/// level; returns `None` if the expansion cannot reach `ASYMPTOTIC_ACCEPT`
/// at this `x`.
///
/// Convergence is judged on the envelope `x^{-k} Γ(1-y)/π ≥ |x^{-k}/Γ(y)|`
/// (`y = β - αk < 0`) because individual terms dip towards zero near the
/// poles of Γ and would fake convergence.
fn asymptotic_adaptive(alpha: f64, beta: f64, x: f64, min_terms: usize) -> Option<f64> {
    let ln_x = x.ln();
    let mut sum: f64 = 0.0;
    let mut prev_env = f64::INFINITY;
    for k in 1..=ASYMPTOTIC_MAX_TERMS {
        let env = asymptotic_envelope(alpha, beta, k, ln_x);
        if k > min_terms && env > prev_env {
            return (prev_env <= ASYMPTOTIC_ACCEPT * sum.abs()).then_some(sum);
        }
        let t = asymptotic_term(alpha, beta, k, ln_x);
        sum += if k % 2 == 1 { t } else { -t };
        if k >= min_terms && env <= ASYMPTOTIC_REL_STOP * sum.abs() {
            return Some(sum);
        }
        prev_env = env;
    }
    (prev_env <= ASYMPTOTIC_ACCEPT * sum.abs()).then_some(sum)
}

fn asymptotic_envelope(alpha: f64, beta: f64, k: usize, ln_x: f64) -> f64 {
    let y = beta - alpha * k as f64;
    let ln_bound = if y > 0.0 {
        -libm::lgamma(y)
    } else {
        libm::lgamma(1.0 - y) - PI.ln()
    };
    (ln_bound - k as f64 * ln_x).exp()
}

/// Quadrature branch, valid for every `x > 0`.
pub fn quadrature(params: MlfParams, x: f64) -> Result<f64> {
    let MlfParams { alpha, beta } = params;
    if !(x > 0.0) {
        return Err(Error::domain(format!(
            "quadrature branch needs x > 0, got {x}"
        )));
    }
    if alpha == 1.0 {
        return alpha_one_integral(beta, x);
    }
    if beta >= 1.0 + alpha {
        let lower = MlfParams {
            alpha,
            beta: beta - alpha,
        };
        let e = quadrature(lower, x)?;
        return Ok((e - rgamma(beta - alpha)) / (-x));
    }
    let opts = QuadOptions {
        abs_tol: 1e-15,
        rel_tol: 1e-12,
        max_intervals: 4000,
    };
    let expo = (1.0 - beta) / alpha;
    let upper = 745.0f64.powf(alpha);
    let (s1, s2) = ((PI * (1.0 - beta)).sin(), (PI * (1.0 - beta + alpha)).sin());
    let c = (PI * alpha).cos();
    let kernel = move |r: f64| -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let num = r * s1 + x * s2;
        let den = r * r + 2.0 * r * x * c + x * x;
        (-r.powf(1.0 / alpha)).exp() * num / den
    };

    // Resolve the denominator's near-pole at r = -x cos(πα) (α > 1/2) and
    // the scale r ~ x.
    let width = x * (PI * alpha).sin();
    let mut pts = vec![0.0, upper, x, 1.0];
    if c < 0.0 {
        let r0 = -x * c;
        pts.extend([r0 - width, r0, r0 + width]);
    }
    pts.retain(|&p| p >= 0.0 && p <= upper);
    pts.sort_by(f64::total_cmp);
    pts.dedup();

    let value = if expo < 0.0 {
        // r = w^q removes the r^expo endpoint singularity.
        let q = 1.0 / (1.0 + expo);
        let wpts: Vec<f64> = pts.iter().map(|r| r.powf(1.0 + expo)).collect();
        quad::integrate(|w: f64| q * kernel(w.powf(q)), &wpts, opts)?.value
    } else {
        quad::integrate(|r: f64| r.powf(expo) * kernel(r), &pts, opts)?.value
    };
    Ok(value / (alpha * PI))
}

/// `E_{1,β}(-x) = 1/Γ(β) ∫_0^1 exp(-x (1 - u^{1/(β-1)})) du` for `β > 1`.
fn alpha_one_integral(beta: f64, x: f64) -> Result<f64> {
    if beta == 1.0 {
        return Ok((-x).exp());
    }
    let inv = 1.0 / (beta - 1.0);
    let opts = QuadOptions {
        abs_tol: 1e-16,
        rel_tol: 1e-13,
        max_intervals: 4000,
    };
    let mut pts = vec![0.0, 1.0];
    let knee = 1.0 - 1.0 / x;
    if knee > 0.0 && knee < 1.0 {
        pts.insert(1, knee);
    }
    let v = quad::integrate(|u: f64| (-x * (1.0 - u.powf(inv))).exp(), &pts, opts)?.value;
    Ok(v * rgamma(beta))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(a: f64, b: f64) -> MlfParams {
        MlfParams::new(a, b).unwrap()
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(MlfParams::new(0.0, 1.0).is_err());
        assert!(MlfParams::new(1.2, 1.5).is_err());
        assert!(MlfParams::new(0.5, 0.4).is_err());
        assert!(ml_eval(p(0.5, 1.0), -1.0).is_err());
        assert!(MlfRegime::new(5.0, 4.0, 3).is_err());
        assert!(MlfRegime::new(5.0, 50.0, 0).is_err());
    }

    #[test]
    fn value_at_zero() {
        assert_eq!(ml_eval(p(0.5, 1.0), 0.0).unwrap(), 1.0);
        let v = ml_eval(p(0.5, 0.5), 0.0).unwrap();
        assert!((v - 1.0 / PI.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn exponential_case() {
        let v = ml_eval(p(1.0, 1.0), 1.0).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-16);
        // E_{1,2}(-x) = (1 - e^{-x}) / x
        for x in [0.3, 4.0, 12.0, 80.0] {
            let v = ml_eval(p(1.0, 2.0), x).unwrap();
            let exact = (1.0 - (-x).exp()) / x;
            assert!(((v - exact) / exact).abs() < 1e-12, "x={x}: {v} vs {exact}");
        }
    }

    #[test]
    fn large_argument_tracks_leading_asymptotic() {
        let v = ml_eval(p(0.3, 1.0), 1e4).unwrap();
        let lead = 1.0 / (1e4 * libm::tgamma(0.7));
        assert!(((v - lead) / lead).abs() < 0.01);
    }

    #[test]
    fn small_alpha_series_falls_back() {
        // the series cannot converge in 500 terms for α = 0.1 at x = 4
        assert!(series(p(0.1, 1.0), 4.0).is_err());
        let (v, m) = MittagLeffler::new(p(0.1, 1.0)).eval_traced(4.0).unwrap();
        assert_eq!(m, Method::Quadrature);
        assert!(v > 0.0 && v < 1.0);
    }

    #[test]
    fn derivative_closed_form() {
        let d = ml_derivative(1.0, 1.0, 1.0).unwrap();
        assert!((d + (-1.0f64).exp()).abs() < 1e-15);
        assert!(ml_derivative(0.2, 100.0, 0.5).unwrap() < 0.0);
        assert!(ml_derivative(0.5, 1.0, 0.0).is_err());
        assert!(ml_derivative(0.5, -1.0, 1.0).is_err());
    }

    #[test]
    fn kernel_integral_exponential_case_and_bound() {
        let v = ml_kernel_integral(1.0, 1.0, 1.0).unwrap();
        assert!((v - (1.0 - (-1.0f64).exp())).abs() < 1e-14);
        for &a in &[0.2, 0.5, 0.8] {
            for &lam in &[1.0, 10.0, 1e4] {
                let v = ml_kernel_integral(a, lam, 2.0).unwrap();
                assert!(v > 0.0 && v <= 1.0 / lam, "a={a} lam={lam} v={v}");
            }
        }
        assert!(ml_kernel_integral(0.5, 0.0, 1.0).is_err());
        assert!(ml_kernel_integral(0.5, 1.0, 0.0).is_err());
    }

    #[test]
    fn rgamma_poles_and_range() {
        assert_eq!(rgamma(0.0), 0.0);
        assert_eq!(rgamma(-3.0), 0.0);
        assert!((rgamma(0.5) - 1.0 / PI.sqrt()).abs() < 1e-15);
        assert!(rgamma(-100.5).is_finite());
        assert_eq!(rgamma(400.0), 0.0);
    }
}
