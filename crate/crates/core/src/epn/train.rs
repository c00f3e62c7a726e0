use serde::{Deserialize, Serialize};

use super::loss::{epn_objective, LossWeights, PclConfig};
use super::{OutputActivation, ProbeParams};
use crate::diff::{Adam, AdamConfig, EarlyStopper};
use crate::error::Result;
use crate::gnn::{require_nonempty, targets, EpochRecord, GcnModel, TrainHistory};
use crate::graph::{Graph, SplitSpec};
use crate::linalg::Matrix;

/// Which backbone representation the probe reads.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureLayer {
    /// The logits.
    #[default]
    Last,
    /// The layer-1 hidden activations.
    SecondToLast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub feature_layer: FeatureLayer,
    pub output_activation: OutputActivation,
    pub weights: LossWeights,
    pub pcl: PclConfig,
    pub adam: AdamConfig,
    pub patience: usize,
    pub max_epochs: usize,
    pub freeze_w2b2: bool,
    /// Standard deviation of the initial `W1` entries.
    pub init_std: f64,
    pub stability_offset: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            feature_layer: FeatureLayer::Last,
            output_activation: OutputActivation::None,
            weights: LossWeights::default(),
            pcl: PclConfig::default(),
            adam: AdamConfig { lr: 1e-2, ..AdamConfig::default() },
            patience: 50,
            max_epochs: 2000,
            freeze_w2b2: true,
            init_std: 0.1,
            stability_offset: 1.0,
        }
    }
}

/// Backbone features and probabilities in evaluation mode.
pub fn probe_features(backbone: &GcnModel, graph: &Graph, layer: FeatureLayer) -> Result<(Matrix, Matrix)> {
    let f = backbone.predict(graph.features())?;
    let z = match layer {
        FeatureLayer::Last => f.logits,
        FeatureLayer::SecondToLast => f.hidden,
    };
    Ok((z, f.probs))
}

/// Fits the probe on top of a frozen backbone. Early stopping tracks the
/// validation objective: EPN-UCE over validation nodes plus the label-free
/// regularizers over all nodes.
pub fn train_probe(
    graph: &Graph,
    split: &SplitSpec,
    backbone: &GcnModel,
    cfg: &ProbeConfig,
    seed: u64,
) -> Result<(ProbeParams, TrainHistory)> {
    require_nonempty(split)?;
    split.validate(graph)?;
    let labels = split.class_map(graph.num_classes()).id_labels(graph);
    let train = targets(&split.train_idx, &labels);
    let val = targets(&split.val_idx, &labels);
    let (z, probs) = probe_features(backbone, graph, cfg.feature_layer)?;

    let mut probe = ProbeParams::new(z.cols(), probs.cols(), cfg.init_std, seed);
    probe.freeze_w2b2 = cfg.freeze_w2b2;
    probe.output_activation = cfg.output_activation;
    let mut adam = Adam::new(cfg.adam);
    let mut stopper = EarlyStopper::new(cfg.patience);
    let mut epochs = Vec::new();
    for epoch in 0..cfg.max_epochs {
        probe.zero_grad();
        let (out, cache) = probe.forward(&z, &probs)?;
        let (terms, g_e, g_q) = epn_objective(&out, &train, &cfg.weights, &cfg.pcl);
        probe.backward(&out, &cache, &g_e, &g_q)?;
        adam.step(&mut probe.trainable_mut());

        let (out, _) = probe.forward(&z, &probs)?;
        let (val_terms, _, _) = epn_objective(&out, &val, &cfg.weights, &cfg.pcl);
        epochs.push(EpochRecord { epoch, train_loss: terms.total, val_loss: val_terms.total });
        if !val_terms.total.is_finite() {
            break;
        }
        if stopper.update(epoch, val_terms.total, || probe.clone()) {
            break;
        }
    }
    let history = TrainHistory { epochs, best_epoch: stopper.best_epoch(), best_val_loss: stopper.best_val_loss() };
    let mut best = stopper.into_best().unwrap_or(probe);
    best.zero_grad();
    Ok((best, history))
}
