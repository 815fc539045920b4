use super::params::NetworkParams;

/// Nadam with the Keras momentum schedule
/// `μ_t = β₁ (1 − ½ · 0.96^{0.004 t})`.
#[derive(Debug, Clone)]
pub struct Nadam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub schedule_decay: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    mu_product: f64,
    step: u64,
}

impl Nadam {
    pub fn new(params: &NetworkParams, learning_rate: f64) -> Self {
        let shapes: Vec<usize> = params.blocks().iter().map(|(_, b)| b.len()).collect();
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            schedule_decay: 0.004,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            mu_product: 1.0,
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    fn mu(&self, t: u64) -> f64 {
        self.beta1 * (1.0 - 0.5 * 0.96f64.powf(t as f64 * self.schedule_decay))
    }

    pub fn update(&mut self, params: &mut NetworkParams, grads: &NetworkParams) {
        self.step += 1;
        let t = self.step;
        let mu_t = self.mu(t);
        let mu_next = self.mu(t + 1);
        self.mu_product *= mu_t;
        let prod_next = self.mu_product * mu_next;
        let (b1, b2) = (self.beta1, self.beta2);
        let v_corr = 1.0 / (1.0 - b2.powf(t as f64));
        let m_corr = mu_next / (1.0 - prod_next);
        let g_corr = (1.0 - mu_t) / (1.0 - self.mu_product);
        let (lr, eps) = (self.learning_rate, self.epsilon);
        let gblocks = grads.blocks();
        for (((theta, (_, g)), m), v) in params
            .blocks_mut()
            .into_iter()
            .zip(gblocks)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            for i in 0..theta.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                let m_hat = m_corr * m[i] + g_corr * gi;
                let v_hat = v[i] * v_corr;
                theta[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}
