use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{expected_ce, expected_ce_grad, kl_to_uniform, kl_to_uniform_grad};
use super::DirichletOpinion;
use crate::diff::{ops, Adam, EarlyStopper};
use crate::error::Result;
use crate::gnn::{require_nonempty, targets, EpochRecord, GcnConfig, GcnModel, TrainHistory};
use crate::graph::{Graph, SplitSpec};
use crate::linalg::Matrix;

/// Nonnegative activation mapping logits to per-class evidence.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceActivation {
    #[default]
    Exp,
    Softplus,
}

impl EvidenceActivation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Self::Exp => x.exp(),
            Self::Softplus => ops::softplus_scalar(x),
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Self::Exp => x.exp(),
            Self::Softplus => ops::sigmoid(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EgnnConfig {
    pub gcn: GcnConfig,
    pub activation: EvidenceActivation,
    pub kl_weight: f64,
}

impl Default for EgnnConfig {
    fn default() -> Self {
        Self { gcn: GcnConfig::default(), activation: EvidenceActivation::Exp, kl_weight: 1.0 }
    }
}

/// A GCN whose final layer emits per-class evidence instead of softmax
/// probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct EgnnHead {
    pub gcn: GcnModel,
    pub activation: EvidenceActivation,
}

impl EgnnHead {
    pub fn evidence(&self, x: &Matrix) -> Result<Matrix> {
        let f = self.gcn.predict(x)?;
        Ok(f.logits.map(|l| self.activation.apply(l)))
    }

    pub fn opinion(&self, x: &Matrix) -> Result<DirichletOpinion> {
        DirichletOpinion::from_evidence(&self.evidence(x)?)
    }
}

/// Mean over `targets` of expected CE plus `kl_weight · KL(α ‖ 1)`, with
/// the gradient with respect to the logits.
pub fn egnn_loss(
    logits: &Matrix,
    targets: &[(usize, usize)],
    activation: EvidenceActivation,
    kl_weight: f64,
) -> (f64, Matrix) {
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    if targets.is_empty() {
        return (0.0, grad);
    }
    let n = targets.len() as f64;
    let mut loss = 0.0;
    for &(i, y) in targets {
        let l = logits.row(i);
        let alpha: Vec<f64> = l.iter().map(|&v| activation.apply(v) + 1.0).collect();
        loss += expected_ce(&alpha, y) + kl_weight * kl_to_uniform(&alpha);
        let g_ce = expected_ce_grad(&alpha, y);
        let g_kl = kl_to_uniform_grad(&alpha);
        for (c, g) in grad.row_mut(i).iter_mut().enumerate() {
            *g = (g_ce[c] + kl_weight * g_kl[c]) * activation.derivative(l[c]) / n;
        }
    }
    (loss / n, grad)
}

pub fn train_egnn(graph: &Graph, split: &SplitSpec, cfg: &EgnnConfig, seed: u64) -> Result<(EgnnHead, TrainHistory)> {
    require_nonempty(split)?;
    split.validate(graph)?;
    let classes = split.class_map(graph.num_classes());
    let labels = classes.id_labels(graph);
    let train = targets(&split.train_idx, &labels);
    let val = targets(&split.val_idx, &labels);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = &cfg.gcn;
    let mut model = GcnModel::new(graph, g.hidden, classes.num_id_classes(), g.dropout, rng.random());
    let mut adam = Adam::new(g.adam);
    let mut stopper = EarlyStopper::new(g.patience);
    let mut epochs = Vec::new();
    let x = graph.features();
    for epoch in 0..g.max_epochs {
        model.zero_grad();
        let fwd = model.forward(x, Some(&mut rng))?;
        let (train_loss, grad) = egnn_loss(&fwd.logits, &train, cfg.activation, cfg.kl_weight);
        model.backward(&fwd, &grad)?;
        adam.step(&mut model.params_mut());

        let (val_loss, _) = egnn_loss(&model.predict(x)?.logits, &val, cfg.activation, cfg.kl_weight);
        epochs.push(EpochRecord { epoch, train_loss, val_loss });
        if stopper.update(epoch, val_loss, || model.params().map(|p| p.value.clone())) {
            break;
        }
    }
    let history = TrainHistory { epochs, best_epoch: stopper.best_epoch(), best_val_loss: stopper.best_val_loss() };
    if let Some(best) = stopper.into_best() {
        for (p, v) in model.params_mut().into_iter().zip(best) {
            p.value = v;
        }
    }
    Ok((EgnnHead { gcn: model, activation: cfg.activation }, history))
}
