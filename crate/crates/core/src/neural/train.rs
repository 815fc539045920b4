use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::NetworkConfig;
use super::net::{backprop_batch, forward_batch, loss_mse, TrainingSample};
use super::optim::Nadam;
use super::params::NetworkParams;
use crate::error::{Error, Result};

/// Loss growth relative to the initial loss treated as divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 3000,
            batch_size: 32,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: NetworkParams,
    /// Mean sample loss of each epoch, measured before that epoch's updates.
    pub history: Vec<f64>,
    pub initial_loss: f64,
}

/// Mean loss of `params` over `data`.
pub fn dataset_loss(
    cfg: &NetworkConfig,
    params: &NetworkParams,
    data: &[TrainingSample],
) -> Result<f64> {
    let mut total = 0.0;
    for chunk in data.chunks(64) {
        let inputs: Vec<_> = chunk.iter().map(|s| &s.input).collect();
        for (pred, s) in forward_batch(cfg, params, &inputs)?.iter().zip(chunk) {
            total += loss_mse(pred, &s.target)?;
        }
    }
    Ok(total / data.len() as f64)
}

pub fn train(
    cfg: &NetworkConfig,
    data: &[TrainingSample],
    opts: TrainOptions,
) -> Result<TrainOutcome> {
    train_from(cfg, NetworkParams::init(cfg), data, opts, |_, _| {})
}

/// Trains from given parameters; `progress(epoch, loss)` is called after
/// every epoch.
pub fn train_from(
    cfg: &NetworkConfig,
    mut params: NetworkParams,
    data: &[TrainingSample],
    opts: TrainOptions,
    mut progress: impl FnMut(usize, f64),
) -> Result<TrainOutcome> {
    if data.is_empty() {
        return Err(Error::precondition("training set is empty"));
    }
    if opts.epochs == 0 {
        return Err(Error::precondition("epochs must be at least 1"));
    }
    if opts.batch_size == 0 || !(opts.learning_rate > 0.0) {
        return Err(Error::precondition(
            "batch size and learning rate must be positive",
        ));
    }
    let initial = dataset_loss(cfg, &params, data)?;
    let mut opt = Nadam::new(&params, opts.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(opts.epochs);
    for epoch in 0..opts.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for idx in order.chunks(opts.batch_size) {
            let batch: Vec<&TrainingSample> = idx.iter().map(|&i| &data[i]).collect();
            let (loss, grads) = backprop_batch(cfg, &params, &batch)?;
            total += loss * batch.len() as f64;
            opt.update(&mut params, &grads);
        }
        let loss = total / data.len() as f64;
        history.push(loss);
        progress(epoch + 1, loss);
        if !loss.is_finite() || loss > DIVERGENCE_FACTOR * initial {
            return Err(Error::Divergence {
                epoch: epoch + 1,
                loss,
                initial,
            });
        }
        if let Some(name) = params.first_non_finite() {
            return Err(Error::NonFinite(format!(
                "parameters {name} after epoch {}",
                epoch + 1
            )));
        }
    }
    Ok(TrainOutcome {
        params,
        history,
        initial_loss: initial,
    })
}
