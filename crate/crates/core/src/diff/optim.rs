use serde::{Deserialize, Serialize};

use super::Param;
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// L2 coefficient added to the gradient before the moment updates.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 1e-4 }
    }
}

/// Bias-corrected Adam with classic (coupled) L2 weight decay.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    step_count: u64,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self { config, m: Vec::new(), v: Vec::new(), step_count: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Applies one update. Moment buffers are created on the first call and
    /// the parameter list must keep the same order and shapes afterwards.
    pub fn step(&mut self, params: &mut [&mut Param]) {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| Matrix::zeros(p.value.rows(), p.value.cols())).collect();
            self.v = self.m.clone();
        }
        assert_eq!(self.m.len(), params.len(), "parameter list changed between Adam steps");
        self.step_count += 1;
        let AdamConfig { lr, beta1, beta2, eps, weight_decay } = self.config;
        let t = self.step_count as f64;
        let c1 = 1.0 - beta1.powf(t);
        let c2 = 1.0 - beta2.powf(t);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            assert_eq!(m.shape(), p.value.shape(), "parameter {} changed shape", p.name);
            let value = p.value.as_mut_slice();
            let grad = p.grad.as_slice();
            for k in 0..value.len() {
                let g = grad[k] + weight_decay * value[k];
                let mk = &mut m.as_mut_slice()[k];
                *mk = beta1 * *mk + (1.0 - beta1) * g;
                let vk = &mut v.as_mut_slice()[k];
                *vk = beta2 * *vk + (1.0 - beta2) * g * g;
                let m_hat = *mk / c1;
                let v_hat = *vk / c2;
                value[k] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

/// Tracks the best validation loss and a snapshot taken at that epoch.
#[derive(Debug, Clone)]
pub struct EarlyStopper<T> {
    pub patience: usize,
    best_val_loss: f64,
    best: Option<T>,
    best_epoch: usize,
    epochs_since_improve: usize,
}

impl<T> EarlyStopper<T> {
    pub fn new(patience: usize) -> Self {
        Self { patience, best_val_loss: f64::INFINITY, best: None, best_epoch: 0, epochs_since_improve: 0 }
    }

    /// Reports the validation loss of `epoch`. `snapshot` is only called on
    /// strict improvement. Returns true once patience is exhausted.
    pub fn update(&mut self, epoch: usize, val_loss: f64, snapshot: impl FnOnce() -> T) -> bool {
        if val_loss < self.best_val_loss {
            self.best_val_loss = val_loss;
            self.best = Some(snapshot());
            self.best_epoch = epoch;
            self.epochs_since_improve = 0;
        } else {
            self.epochs_since_improve += 1;
        }
        self.epochs_since_improve >= self.patience
    }

    pub fn best_val_loss(&self) -> f64 {
        self.best_val_loss
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn into_best(self) -> Option<T> {
        self.best
    }
}
