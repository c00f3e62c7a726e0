//! Evidential probe: a two-layer head over frozen backbone features that
//! predicts total evidence, combined with the backbone's class probabilities.

mod loss;
mod train;

pub use loss::{
    confidence, epn_objective, epn_uce_loss, epn_uce_loss_grad, ice_loss, ice_loss_grad, pcl_loss, pcl_loss_grad,
    LossWeights, ObjectiveTerms, PclConfig,
};
pub use train::{probe_features, train_probe, FeatureLayer, ProbeConfig};

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::diff::{checkpoint_take as take, ops, Checkpoint, Param};
use crate::edl::UncertaintyScores;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Optional nonnegative map applied after the output ReLU.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    #[default]
    None,
    Exp,
    Softplus,
}

impl OutputActivation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Self::None => x,
            Self::Exp => x.exp(),
            Self::Softplus => ops::softplus_scalar(x),
        }
    }

    fn derivative(self, x: f64) -> f64 {
        match self {
            Self::None => 1.0,
            Self::Exp => x.exp(),
            Self::Softplus => ops::sigmoid(x),
        }
    }
}

/// `e_total = act(relu(w2ᵀ exp(W1ᵀ z + b1) + b2))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeParams {
    /// `H_in × C`.
    pub w1: Param,
    /// `1 × C`.
    pub b1: Param,
    /// `C × 1`.
    pub w2: Param,
    /// `1 × 1`.
    pub b2: Param,
    pub freeze_w2b2: bool,
    pub output_activation: OutputActivation,
}

/// Probe output for every node.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeOutput {
    pub e_total: Vec<f64>,
    /// Hidden layer `exp(W1ᵀz + b1)`, one row per node.
    pub q: Matrix,
    /// `(C + e_total)·p̃`.
    pub alpha: Matrix,
    /// Backbone probabilities the opinion was built from.
    pub probs: Matrix,
    /// Added to the strength when computing aleatoric uncertainty.
    pub stability_offset: f64,
}

/// Intermediates needed by the backward pass.
#[derive(Debug, Clone)]
pub struct ProbeCache {
    z: Matrix,
    s: Vec<f64>,
    r: Vec<f64>,
}

impl ProbeParams {
    /// Gaussian `W1` with standard deviation `init_std`, zero `b1`,
    /// `w2 = 1`, `b2 = 0`.
    pub fn new(input_dim: usize, num_classes: usize, init_std: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, init_std).expect("finite standard deviation");
        let data = (0..input_dim * num_classes).map(|_| normal.sample(&mut rng)).collect();
        let w1 = Matrix::from_vec(input_dim, num_classes, data).expect("length matches");
        Self::from_weights(w1, Matrix::zeros(1, num_classes), Matrix::filled(num_classes, 1, 1.0), Matrix::zeros(1, 1))
    }

    pub fn from_weights(w1: Matrix, b1: Matrix, w2: Matrix, b2: Matrix) -> Self {
        Self {
            w1: Param::new("probe.w1", w1),
            b1: Param::new("probe.b1", b1),
            w2: Param::new("probe.w2", w2),
            b2: Param::new("probe.b2", b2),
            freeze_w2b2: true,
            output_activation: OutputActivation::None,
        }
    }

    /// Input-independent evidence: `W1 = 0`, `b1 = n·(1, −1)`, `w2 = 1`, `b2 = 0`,
    /// giving `e_total = 2 cosh(n)` for every input.
    pub fn constant_evidence(input_dim: usize, n: f64) -> Self {
        Self::from_weights(
            Matrix::zeros(input_dim, 2),
            Matrix::row_vector(vec![n, -n]),
            Matrix::filled(2, 1, 1.0),
            Matrix::zeros(1, 1),
        )
    }

    pub fn from_checkpoint(mut ckpt: Checkpoint, input_dim: usize, num_classes: usize) -> Result<Self> {
        let c = num_classes;
        let w1 = take(&mut ckpt, "probe.w1", (input_dim, c))?;
        let b1 = take(&mut ckpt, "probe.b1", (1, c))?;
        let w2 = take(&mut ckpt, "probe.w2", (c, 1))?;
        let b2 = take(&mut ckpt, "probe.b2", (1, 1))?;
        Ok(Self::from_weights(w1, b1, w2, b2))
    }

    pub fn input_dim(&self) -> usize {
        self.w1.value.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.w1.value.cols()
    }

    pub fn params(&self) -> [&Param; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    /// The parameters the optimizer updates.
    pub fn trainable_mut(&mut self) -> Vec<&mut Param> {
        if self.freeze_w2b2 {
            vec![&mut self.w1, &mut self.b1]
        } else {
            vec![&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
        }
    }

    pub fn zero_grad(&mut self) {
        for p in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            p.zero_grad();
        }
    }

    pub fn forward(&self, z: &Matrix, probs: &Matrix) -> Result<(ProbeOutput, ProbeCache)> {
        let c = self.num_classes();
        if z.cols() != self.input_dim() || probs.cols() != c || z.rows() != probs.rows() {
            return Err(Error::Shape(format!(
                "probe {}→{} given features {:?} and probabilities {:?}",
                self.input_dim(),
                c,
                z.shape(),
                probs.shape()
            )));
        }
        let q = ops::exp(&ops::add_row_bias(&ops::matmul(z, &self.w1.value)?, &self.b1.value)?);
        let b2 = self.b2.value[(0, 0)];
        let s: Vec<f64> = q.matmul(&self.w2.value)?.into_vec().into_iter().map(|v| v + b2).collect();
        let r: Vec<f64> = s.iter().map(|v| v.max(0.0)).collect();
        let e_total: Vec<f64> = r.iter().map(|&v| self.output_activation.apply(v)).collect();
        let mut alpha = probs.clone();
        for (i, &e) in e_total.iter().enumerate() {
            let strength = c as f64 + e;
            for a in alpha.row_mut(i) {
                *a *= strength;
            }
        }
        let out = ProbeOutput { e_total, q, alpha, probs: probs.clone(), stability_offset: 1.0 };
        Ok((out, ProbeCache { z: z.clone(), s, r }))
    }

    /// Accumulates parameter gradients from `∂L/∂e_total` and `∂L/∂q`.
    pub fn backward(&mut self, out: &ProbeOutput, cache: &ProbeCache, g_e: &[f64], g_q: &Matrix) -> Result<()> {
        let n = g_e.len();
        let g_s: Vec<f64> = (0..n)
            .map(|i| if cache.s[i] > 0.0 { g_e[i] * self.output_activation.derivative(cache.r[i]) } else { 0.0 })
            .collect();
        let g_s = Matrix::from_vec(n, 1, g_s)?;
        self.b2.accumulate(&g_s.col_sums());
        let (g_q_from_s, g_w2) = ops::matmul_backward(&out.q, &self.w2.value, &g_s)?;
        self.w2.accumulate(&g_w2);
        let mut g_q_total = g_q.clone();
        g_q_total.add_assign(&g_q_from_s)?;
        let g_pre = ops::exp_backward(&out.q, &g_q_total)?;
        let (g_zw, g_b1) = ops::add_row_bias_backward(&g_pre);
        self.b1.accumulate(&g_b1);
        let (_, g_w1) = ops::matmul_backward(&cache.z, &self.w1.value, &g_zw)?;
        self.w1.accumulate(&g_w1);
        Ok(())
    }
}

/// Forward pass without the backward cache.
pub fn epn_forward(probe: &ProbeParams, z: &Matrix, probs: &Matrix) -> Result<ProbeOutput> {
    Ok(probe.forward(z, probs)?.0)
}

/// `u_epi = C/(e + C)`; `u_alea` from `α/(α₀ + offset)`.
pub fn probe_uncertainties(out: &ProbeOutput) -> UncertaintyScores {
    let c = out.alpha.cols() as f64;
    let epistemic = out.e_total.iter().map(|e| c / (e + c)).collect();
    let aleatoric = out
        .alpha
        .iter_rows()
        .zip(&out.e_total)
        .map(|(row, e)| {
            let s = c + e + out.stability_offset;
            -row.iter().copied().fold(f64::NEG_INFINITY, f64::max) / s
        })
        .collect();
    UncertaintyScores { aleatoric, epistemic }
}

impl ProbeOutput {
    /// `node_id, e_total, u_alea, u_epi, alpha_0..alpha_{C-1}`.
    pub fn to_csv(&self) -> String {
        let u = probe_uncertainties(self);
        let mut s = String::from("node_id,e_total,u_alea,u_epi");
        for c in 0..self.alpha.cols() {
            write!(s, ",alpha_{c}").expect("writing to a String cannot fail");
        }
        s.push('\n');
        for i in 0..self.e_total.len() {
            write!(s, "{i},{:?},{:?},{:?}", self.e_total[i], u.aleatoric[i], u.epistemic[i])
                .expect("writing to a String cannot fail");
            for a in self.alpha.row(i) {
                write!(s, ",{a:?}").expect("writing to a String cannot fail");
            }
            s.push('\n');
        }
        s
    }
}
