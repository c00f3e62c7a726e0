use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::diff::ops::logsumexp;
use crate::error::{Error, Result};
use crate::graph::{Graph, NormKind};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub temperature: f64,
    /// Weight on a node's own energy in each propagation step.
    pub gamma: f64,
    pub iterations: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { temperature: 1.0, gamma: 0.2, iterations: 2 }
    }
}

/// Per-node uncertainty scores derived from the backbone output alone.
/// Larger values mean more uncertain for every field.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineScores {
    pub entropy: Vec<f64>,
    pub max_score: Vec<f64>,
    pub energy: Vec<f64>,
    pub propagated_energy: Vec<f64>,
}

pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>()
}

/// `−T · logsumexp(l / T)`.
pub fn energy(logits: &[f64], temperature: f64) -> f64 {
    let scaled: Vec<f64> = logits.iter().map(|l| l / temperature).collect();
    -temperature * logsumexp(&scaled)
}

/// `k` steps of `E ← γ E + (1 − γ) D⁻¹ A E`.
pub fn propagate_energy(e0: &[f64], graph: &Graph, gamma: f64, k: usize) -> Vec<f64> {
    let rw = graph.normalize(NormKind::RwNoselfloop).matrix;
    let mut e = e0.to_vec();
    for _ in 0..k {
        let agg = rw.mul_vec(&e);
        for (v, a) in e.iter_mut().zip(agg) {
            *v = gamma * *v + (1.0 - gamma) * a;
        }
    }
    e
}

pub fn baseline_scores(logits: &Matrix, probs: &Matrix, graph: &Graph, cfg: &BaselineConfig) -> Result<BaselineScores> {
    if logits.shape() != probs.shape() || logits.rows() != graph.num_nodes() {
        return Err(Error::Shape(format!(
            "logits {:?}, probs {:?} for {} nodes",
            logits.shape(),
            probs.shape(),
            graph.num_nodes()
        )));
    }
    let entropy = probs.iter_rows().map(entropy).collect();
    let max_score = probs.iter_rows().map(|p| 1.0 - p.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
    let energy: Vec<f64> = logits.iter_rows().map(|l| energy(l, cfg.temperature)).collect();
    let propagated_energy = propagate_energy(&energy, graph, cfg.gamma, cfg.iterations);
    Ok(BaselineScores { entropy, max_score, energy, propagated_energy })
}

impl BaselineScores {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("node_id,entropy,max_score,energy,propagated_energy\n");
        for i in 0..self.entropy.len() {
            writeln!(
                s,
                "{i},{:?},{:?},{:?},{:?}",
                self.entropy[i], self.max_score[i], self.energy[i], self.propagated_energy[i]
            )
            .expect("writing to a String cannot fail");
        }
        s
    }
}
