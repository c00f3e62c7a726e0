//! Two-layer GCN backbone and the logit-based baseline scores.

mod baselines;

pub use baselines::{baseline_scores, BaselineConfig, BaselineScores};

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diff::checkpoint_take as take;
use crate::diff::{ops, Adam, AdamConfig, Checkpoint, EarlyStopper, Param};
use crate::error::{Error, Result};
use crate::graph::{Graph, NormKind, NormalizedAdjacency, SplitSpec};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GcnConfig {
    pub hidden: usize,
    pub dropout: f64,
    pub adam: AdamConfig,
    pub patience: usize,
    pub max_epochs: usize,
}

impl Default for GcnConfig {
    fn default() -> Self {
        Self { hidden: 64, dropout: 0.5, adam: AdamConfig::default(), patience: 50, max_epochs: 1000 }
    }
}

/// `logits = Â · dropout(relu(Â X W1 + b1)) · W2 + b2` with `Â` the
/// self-looped symmetric normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    pub w1: Param,
    pub b1: Param,
    pub w2: Param,
    pub b2: Param,
    pub dropout: f64,
    adj: NormalizedAdjacency,
}

/// Intermediates of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct GcnForward {
    ax: Matrix,
    pre1: Matrix,
    /// Layer-1 output after ReLU (the "second to last" representation).
    pub hidden: Matrix,
    mask: Option<Matrix>,
    dropped: Matrix,
    pub logits: Matrix,
    pub probs: Matrix,
}

fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let dist = Uniform::new_inclusive(-limit, limit).expect("finite bounds");
    let data = (0..rows * cols).map(|_| dist.sample(rng)).collect();
    Matrix::from_vec(rows, cols, data).expect("length matches")
}

impl GcnModel {
    /// Glorot-uniform weights and zero biases.
    pub fn new(graph: &Graph, hidden: usize, num_classes: usize, dropout: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = graph.num_features();
        let w1 = glorot(f, hidden, &mut rng);
        let w2 = glorot(hidden, num_classes, &mut rng);
        Self::from_weights(graph, w1, Matrix::zeros(1, hidden), w2, Matrix::zeros(1, num_classes), dropout)
    }

    pub fn from_weights(graph: &Graph, w1: Matrix, b1: Matrix, w2: Matrix, b2: Matrix, dropout: f64) -> Self {
        Self {
            w1: Param::new("gcn.w1", w1),
            b1: Param::new("gcn.b1", b1),
            w2: Param::new("gcn.w2", w2),
            b2: Param::new("gcn.b2", b2),
            dropout,
            adj: graph.normalize(NormKind::SymSelfloop),
        }
    }

    /// Restores weights saved with [`GcnModel::params`], checking them
    /// against the graph's feature width.
    pub fn from_checkpoint(graph: &Graph, mut ckpt: Checkpoint, dropout: f64) -> Result<Self> {
        let w1 = ckpt.remove("gcn.w1").ok_or_else(|| Error::Checkpoint("missing parameter \"gcn.w1\"".into()))?;
        if w1.rows() != graph.num_features() {
            return Err(Error::Checkpoint(format!(
                "gcn.w1 has {} input rows but the graph has {} features",
                w1.rows(),
                graph.num_features()
            )));
        }
        let h = w1.cols();
        let b1 = take(&mut ckpt, "gcn.b1", (1, h))?;
        let w2 = ckpt.remove("gcn.w2").ok_or_else(|| Error::Checkpoint("missing parameter \"gcn.w2\"".into()))?;
        if w2.rows() != h {
            return Err(Error::Checkpoint(format!("gcn.w2 has {} rows, expected {h}", w2.rows())));
        }
        let c = w2.cols();
        let b2 = take(&mut ckpt, "gcn.b2", (1, c))?;
        Ok(Self::from_weights(graph, w1, b1, w2, b2, dropout))
    }

    pub fn num_classes(&self) -> usize {
        self.w2.value.cols()
    }

    pub fn hidden_width(&self) -> usize {
        self.w1.value.cols()
    }

    pub fn params(&self) -> [&Param; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn params_mut(&mut self) -> [&mut Param; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Forward pass. Dropout is active iff `dropout_rng` is given.
    pub fn forward(&self, x: &Matrix, dropout_rng: Option<&mut ChaCha8Rng>) -> Result<GcnForward> {
        if x.cols() != self.w1.value.rows() || x.rows() != self.adj.matrix.rows() {
            return Err(Error::Shape(format!(
                "features {:?} for a model expecting {} nodes and {} features",
                x.shape(),
                self.adj.matrix.rows(),
                self.w1.value.rows()
            )));
        }
        let ax = ops::spmm(&self.adj.matrix, x)?;
        let pre1 = ops::add_row_bias(&ops::matmul(&ax, &self.w1.value)?, &self.b1.value)?;
        let hidden = ops::relu(&pre1);
        let (dropped, mask) = match dropout_rng {
            Some(rng) => ops::dropout(&hidden, self.dropout, true, rng),
            None => (hidden.clone(), None),
        };
        let t = ops::matmul(&dropped, &self.w2.value)?;
        let logits = ops::add_row_bias(&ops::spmm(&self.adj.matrix, &t)?, &self.b2.value)?;
        let probs = ops::row_softmax(&logits);
        Ok(GcnForward { ax, pre1, hidden, mask, dropped, logits, probs })
    }

    /// Evaluation-mode forward pass.
    pub fn predict(&self, x: &Matrix) -> Result<GcnForward> {
        self.forward(x, None)
    }

    /// Accumulates parameter gradients given `∂L/∂logits`.
    pub fn backward(&mut self, fwd: &GcnForward, grad_logits: &Matrix) -> Result<()> {
        let (g_t, g_b2) = ops::add_row_bias_backward(grad_logits);
        self.b2.accumulate(&g_b2);
        let g_t = ops::spmm_backward(&self.adj.matrix, &g_t)?;
        let (g_dropped, g_w2) = ops::matmul_backward(&fwd.dropped, &self.w2.value, &g_t)?;
        self.w2.accumulate(&g_w2);
        let g_hidden = ops::dropout_backward(fwd.mask.as_ref(), &g_dropped)?;
        let g_pre1 = ops::relu_backward(&fwd.pre1, &g_hidden)?;
        let (g_ax_w1, g_b1) = ops::add_row_bias_backward(&g_pre1);
        self.b1.accumulate(&g_b1);
        let (_, g_w1) = ops::matmul_backward(&fwd.ax, &self.w1.value, &g_ax_w1)?;
        self.w1.accumulate(&g_w1);
        Ok(())
    }

    fn snapshot(&self) -> [Matrix; 4] {
        self.params().map(|p| p.value.clone())
    }

    fn restore(&mut self, s: [Matrix; 4]) {
        for (p, v) in self.params_mut().into_iter().zip(s) {
            p.value = v;
        }
    }
}

/// Mean cross-entropy over `(node, class)` pairs and its gradient with
/// respect to the logits.
pub fn cross_entropy(logits: &Matrix, targets: &[(usize, usize)]) -> (f64, Matrix) {
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    if targets.is_empty() {
        return (0.0, grad);
    }
    let n = targets.len() as f64;
    let mut loss = 0.0;
    for &(i, y) in targets {
        let row = logits.row(i);
        let lse = ops::logsumexp(row);
        loss += lse - row[y];
        for (g, &l) in grad.row_mut(i).iter_mut().zip(row) {
            *g = (l - lse).exp() / n;
        }
        grad[(i, y)] -= 1.0 / n;
    }
    (loss / n, grad)
}

/// Training-node pairs in model label space.
pub(crate) fn targets(nodes: &[usize], labels: &[Option<usize>]) -> Vec<(usize, usize)> {
    nodes.iter().filter_map(|&i| labels[i].map(|y| (i, y))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

impl TrainHistory {
    /// Validation losses of the epochs that improved on all earlier ones.
    pub fn best_val_sequence(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.epochs
            .iter()
            .filter_map(|r| {
                if r.val_loss < best {
                    best = r.val_loss;
                    Some(best)
                } else {
                    None
                }
            })
            .collect()
    }
}

pub(crate) fn require_nonempty(split: &SplitSpec) -> Result<()> {
    if split.train_idx.is_empty() {
        return Err(Error::EmptySplit("train set is empty".into()));
    }
    if split.val_idx.is_empty() {
        return Err(Error::EmptySplit("validation set is empty".into()));
    }
    Ok(())
}

/// Trains the backbone with cross-entropy on the split's ID classes and
/// returns the best-validation snapshot.
pub fn train_backbone(graph: &Graph, split: &SplitSpec, cfg: &GcnConfig, seed: u64) -> Result<(GcnModel, TrainHistory)> {
    require_nonempty(split)?;
    split.validate(graph)?;
    let classes = split.class_map(graph.num_classes());
    let labels = classes.id_labels(graph);
    let train = targets(&split.train_idx, &labels);
    let val = targets(&split.val_idx, &labels);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = GcnModel::new(graph, cfg.hidden, classes.num_id_classes(), cfg.dropout, rand::Rng::random(&mut rng));
    let mut adam = Adam::new(cfg.adam);
    let mut stopper = EarlyStopper::new(cfg.patience);
    let mut epochs = Vec::new();
    let x = graph.features();
    for epoch in 0..cfg.max_epochs {
        model.zero_grad();
        let fwd = model.forward(x, Some(&mut rng))?;
        let (train_loss, g) = cross_entropy(&fwd.logits, &train);
        model.backward(&fwd, &g)?;
        adam.step(&mut model.params_mut());

        let (val_loss, _) = cross_entropy(&model.predict(x)?.logits, &val);
        epochs.push(EpochRecord { epoch, train_loss, val_loss });
        if stopper.update(epoch, val_loss, || model.snapshot()) {
            break;
        }
    }
    let history = TrainHistory { epochs, best_epoch: stopper.best_epoch(), best_val_loss: stopper.best_val_loss() };
    if let Some(best) = stopper.into_best() {
        model.restore(best);
    }
    Ok((model, history))
}
