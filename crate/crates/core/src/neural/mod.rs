//! Multi-channel inversion network trained with Nadam on a mean-squared
//! error loss.

mod checkpoint;
mod config;
mod net;
mod optim;
mod params;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT};
pub use config::{NetworkConfig, ACTIVATIONS, MAX_DEFAULT_HIDDEN};
pub use net::{
    backprop, backprop_batch, forward_batch, forward_pass, loss_mse, reconstruct, TrainingSample,
};
pub use optim::Nadam;
pub use params::NetworkParams;
pub use train::{dataset_loss, train, train_from, TrainOptions, TrainOutcome, DIVERGENCE_FACTOR};
