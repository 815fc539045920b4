use ndarray::{Array1, Array2, Array4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::NetworkConfig;

/// Trainable weights. Convolution kernels are indexed
/// `[out_channel, in_channel, row, col]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub conv1_w: Array4<f64>,
    pub conv1_b: Array1<f64>,
    pub fc1_w: Vec<Array2<f64>>,
    pub fc1_b: Vec<Array1<f64>>,
    pub fc2_w: Vec<Array2<f64>>,
    pub fc2_b: Vec<Array1<f64>>,
    pub conv2_w: Array4<f64>,
    pub conv2_b: Array1<f64>,
}

fn glorot(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize, fan_out: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n: usize = shape.iter().product();
    (0..n).map(|_| rng.random_range(-limit..limit)).collect()
}

impl NetworkParams {
    pub fn zeros(cfg: &NetworkConfig) -> Self {
        let (k, m, h) = (cfg.channels, cfg.points(), cfg.hidden());
        let (r1, c1) = cfg.kernel_shape(cfg.conv1_kernel);
        let (r2, c2) = cfg.kernel_shape(cfg.conv2_kernel);
        Self {
            conv1_w: Array4::zeros((k, k, r1, c1)),
            conv1_b: Array1::zeros(k),
            fc1_w: vec![Array2::zeros((h, m)); k],
            fc1_b: vec![Array1::zeros(h); k],
            fc2_w: vec![Array2::zeros((m, h)); k],
            fc2_b: vec![Array1::zeros(m); k],
            conv2_w: Array4::zeros((k, k, r2, c2)),
            conv2_b: Array1::zeros(k),
        }
    }

    /// Seeded uniform Glorot initialization, zero biases.
    pub fn init(cfg: &NetworkConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut p = Self::zeros(cfg);
        let (k, m, h) = (cfg.channels, cfg.points(), cfg.hidden());
        let conv = |rng: &mut ChaCha8Rng, w: &mut Array4<f64>| {
            let s = w.shape().to_vec();
            let fan = k * s[2] * s[3];
            let v = glorot(rng, &s, fan, fan);
            w.as_slice_mut()
                .expect("standard layout")
                .copy_from_slice(&v);
        };
        conv(&mut rng, &mut p.conv1_w);
        for c in 0..k {
            let v = glorot(&mut rng, &[h, m], m, h);
            p.fc1_w[c]
                .as_slice_mut()
                .expect("standard layout")
                .copy_from_slice(&v);
            let v = glorot(&mut rng, &[m, h], h, m);
            p.fc2_w[c]
                .as_slice_mut()
                .expect("standard layout")
                .copy_from_slice(&v);
        }
        conv(&mut rng, &mut p.conv2_w);
        p
    }

    /// Parameter blocks in declaration order.
    pub fn blocks(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = Vec::new();
        out.push((
            "conv1.weight".into(),
            self.conv1_w.as_slice().expect("standard layout"),
        ));
        out.push((
            "conv1.bias".into(),
            self.conv1_b.as_slice().expect("standard layout"),
        ));
        for c in 0..self.fc1_w.len() {
            out.push((
                format!("fc1[{c}].weight"),
                self.fc1_w[c].as_slice().expect("standard layout"),
            ));
            out.push((
                format!("fc1[{c}].bias"),
                self.fc1_b[c].as_slice().expect("standard layout"),
            ));
            out.push((
                format!("fc2[{c}].weight"),
                self.fc2_w[c].as_slice().expect("standard layout"),
            ));
            out.push((
                format!("fc2[{c}].bias"),
                self.fc2_b[c].as_slice().expect("standard layout"),
            ));
        }
        out.push((
            "conv2.weight".into(),
            self.conv2_w.as_slice().expect("standard layout"),
        ));
        out.push((
            "conv2.bias".into(),
            self.conv2_b.as_slice().expect("standard layout"),
        ));
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        out.push(self.conv1_w.as_slice_mut().expect("standard layout"));
        out.push(self.conv1_b.as_slice_mut().expect("standard layout"));
        for (((a, b), c), d) in self
            .fc1_w
            .iter_mut()
            .zip(self.fc1_b.iter_mut())
            .zip(self.fc2_w.iter_mut())
            .zip(self.fc2_b.iter_mut())
        {
            out.push(a.as_slice_mut().expect("standard layout"));
            out.push(b.as_slice_mut().expect("standard layout"));
            out.push(c.as_slice_mut().expect("standard layout"));
            out.push(d.as_slice_mut().expect("standard layout"));
        }
        out.push(self.conv2_w.as_slice_mut().expect("standard layout"));
        out.push(self.conv2_b.as_slice_mut().expect("standard layout"));
        out
    }

    pub fn count(&self) -> usize {
        self.blocks().iter().map(|(_, b)| b.len()).sum()
    }

    /// Name of the first block holding a non-finite value.
    pub fn first_non_finite(&self) -> Option<String> {
        self.blocks()
            .into_iter()
            .find(|(_, b)| b.iter().any(|v| !v.is_finite()))
            .map(|(n, _)| n)
    }
}
