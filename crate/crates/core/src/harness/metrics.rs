use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::NoiseScale;
use crate::domain::Field;
use crate::error::{Error, Result};

/// Per-entry standard deviation of the noise added to `clean`.
pub fn noise_sigma(clean: &Field, delta: f64, scale: NoiseScale) -> f64 {
    match scale {
        NoiseScale::Relative => delta * clean.max_abs(),
        NoiseScale::Absolute => delta,
    }
}

/// `u + σ ξ` with ξ i.i.d. standard normal per entry, drawn component by
/// component in grid order.
pub fn add_noise(field: &Field, delta: f64, seed: u64, scale: NoiseScale) -> Result<Field> {
    if !(delta >= 0.0) {
        return Err(Error::precondition(format!("noise level {delta} must be >= 0")));
    }
    if delta == 0.0 {
        return Ok(field.clone());
    }
    let sigma = noise_sigma(field, delta, scale);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noisy = field.values().mapv(|v| {
        let xi: f64 = StandardNormal.sample(&mut rng);
        v + sigma * xi
    });
    Field::new(*field.grid(), noisy)
}

/// Expected weighted norm of the noise: `σ √(K M w)`.
pub fn noise_estimate(clean: &Field, delta: f64, scale: NoiseScale) -> f64 {
    let n = (clean.components() * clean.grid().points()) as f64;
    noise_sigma(clean, delta, scale) * (n * clean.grid().cell_weight()).sqrt()
}

/// `‖estimate − truth‖₂ / ‖truth‖₂` over all entries.
pub fn relative_rmse(estimate: &Field, truth: &Field) -> Result<f64> {
    estimate.check_compatible(truth.grid(), truth.components())?;
    let den = truth.values().iter().map(|v| v * v).sum::<f64>().sqrt();
    if den == 0.0 {
        return Err(Error::precondition("relative error against a zero field"));
    }
    let num = (estimate.values() - truth.values())
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    Ok(num / den)
}
