//! Adam with decoupled weight decay.

use crate::graph::Tensor;
use crate::real::Real;

/// A named trainable tensor.
#[derive(Debug, Clone)]
pub struct Parameter<T: Real> {
    pub name: String,
    pub tensor: Tensor<T>,
}

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.0 }
    }
}

#[derive(Debug)]
pub struct Adam<T: Real> {
    pub cfg: AdamConfig,
    /// First/second moment per parameter, aligned with the param list.
    state: Vec<(Vec<T>, Vec<T>)>,
    step: u64,
}

impl<T: Real> Adam<T> {
    pub fn new(cfg: AdamConfig) -> Self {
        Adam { cfg, state: Vec::new(), step: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update. Decay is applied to the weights before the moment update
    /// (decoupled); missing gradients are treated as zero so decay still
    /// applies.
    pub fn step(&mut self, params: &[Parameter<T>]) {
        if self.state.is_empty() {
            self.state = params
                .iter()
                .map(|p| {
                    let n = p.tensor.numel();
                    (vec![T::ZERO; n], vec![T::ZERO; n])
                })
                .collect();
        }
        assert_eq!(self.state.len(), params.len(), "optimizer bound to a different model");
        self.step += 1;
        let lr = T::from_f64(self.cfg.lr);
        let b1 = T::from_f64(self.cfg.beta1);
        let b2 = T::from_f64(self.cfg.beta2);
        let eps = T::from_f64(self.cfg.eps);
        let wd = T::from_f64(self.cfg.weight_decay);
        let bc1 = T::ONE / T::from_f64(1.0 - self.cfg.beta1.powi(self.step as i32));
        let bc2 = T::ONE / T::from_f64(1.0 - self.cfg.beta2.powi(self.step as i32));

        for (p, (m, v)) in params.iter().zip(&mut self.state) {
            let grad = p.tensor.grad();
            let mut data = p.tensor.value();
            for i in 0..data.len() {
                let g = grad.as_ref().map(|g| g[i]).unwrap_or(T::ZERO);
                data[i] = data[i] - lr * wd * data[i];
                m[i] = b1 * m[i] + (T::ONE - b1) * g;
                v[i] = b2 * v[i] + (T::ONE - b2) * g * g;
                let mhat = m[i] * bc1;
                let vhat = v[i] * bc2;
                data[i] = data[i] - lr * mhat / (vhat.sqrt() + eps);
            }
            p.tensor.set_value(&data);
        }
    }

    /// Snapshot of (m, v) per parameter plus the step counter.
    pub fn export_state(&self) -> (Vec<(Vec<T>, Vec<T>)>, u64) {
        (self.state.clone(), self.step)
    }

    pub fn import_state(&mut self, state: Vec<(Vec<T>, Vec<T>)>, step: u64) {
        self.state = state;
        self.step = step;
    }
}
