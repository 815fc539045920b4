use serde::{Deserialize, Serialize};

use crate::domain::Grid;
use crate::error::{Error, Result};

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

/// Architecture of the multi-channel inversion network.
///
/// Layers: a same-padded convolution mixing the K channels, a split into
/// per-channel vectors, two fully connected layers per channel (tanh, then
/// sine), concatenation, and a final same-padded convolution over all
/// channels. Inputs are multiplied by `input_scale` and outputs by
/// `output_scale`; both are fixed, not trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub channels: usize,
    /// `[nx]` or `[nx, ny]`.
    pub input_shape: Vec<usize>,
    pub conv1_kernel: usize,
    /// Hidden and output widths of the per-channel stage.
    pub fc_widths: [usize; 2],
    pub conv2_kernel: usize,
    pub seed: u64,
    #[serde(default = "one")]
    pub input_scale: f64,
    #[serde(default = "one")]
    pub output_scale: f64,
    /// When false every bias stays at zero and the network is an odd map.
    #[serde(default = "yes")]
    pub use_bias: bool,
}

pub const ACTIVATIONS: [&str; 2] = ["tanh", "sin"];
pub const MAX_DEFAULT_HIDDEN: usize = 256;

impl NetworkConfig {
    /// Defaults: 3-wide kernels, hidden width `min(256, 2M)`.
    pub fn new(channels: usize, input_shape: Vec<usize>, seed: u64) -> Result<Self> {
        let m: usize = input_shape.iter().product();
        let cfg = Self {
            channels,
            input_shape,
            conv1_kernel: 3,
            fc_widths: [MAX_DEFAULT_HIDDEN.min(2 * m), m],
            conv2_kernel: 3,
            seed,
            input_scale: 1.0,
            output_scale: 1.0,
            use_bias: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn for_grid(channels: usize, grid: &Grid, seed: u64) -> Result<Self> {
        Self::new(channels, grid.shape(), seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 {
            return Err(Error::Config("network needs at least one channel".into()));
        }
        if self.input_shape.is_empty()
            || self.input_shape.len() > 2
            || self.input_shape.contains(&0)
        {
            return Err(Error::Config(format!(
                "input shape {:?} must be 1D or 2D",
                self.input_shape
            )));
        }
        for (name, k) in [("conv1", self.conv1_kernel), ("conv2", self.conv2_kernel)] {
            if k % 2 == 0 {
                return Err(Error::Config(format!("{name} kernel {k} must be odd")));
            }
        }
        if self.fc_widths[0] == 0 {
            return Err(Error::Config("hidden width must be positive".into()));
        }
        if self.fc_widths[1] != self.points() {
            return Err(Error::Config(format!(
                "fc output width {} must equal the per-channel point count {}",
                self.fc_widths[1],
                self.points()
            )));
        }
        if !(self.input_scale > 0.0 && self.input_scale.is_finite())
            || !(self.output_scale > 0.0 && self.output_scale.is_finite())
        {
            return Err(Error::Config(
                "input/output scales must be positive and finite".into(),
            ));
        }
        Ok(())
    }

    pub fn nx(&self) -> usize {
        self.input_shape[0]
    }

    pub fn ny(&self) -> usize {
        self.input_shape.get(1).copied().unwrap_or(1)
    }

    pub fn points(&self) -> usize {
        self.input_shape.iter().product()
    }

    pub fn hidden(&self) -> usize {
        self.fc_widths[0]
    }

    /// `(rows, cols)` of a kernel; 1D grids use a single row.
    pub fn kernel_shape(&self, k: usize) -> (usize, usize) {
        if self.input_shape.len() == 1 {
            (1, k)
        } else {
            (k, k)
        }
    }
}
