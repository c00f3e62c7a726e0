//! Graph smoothing of Dirichlet opinions.

use serde::{Deserialize, Serialize};

use crate::edl::DirichletOpinion;
use crate::error::{Error, Result};
use crate::graph::{Graph, NormKind};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropMode {
    #[default]
    None,
    Vacuity,
    Evidence,
    Both,
}

impl PropMode {
    pub const ALL: [PropMode; 4] = [PropMode::None, PropMode::Vacuity, PropMode::Evidence, PropMode::Both];

    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Vacuity => "vacuity",
            Self::Evidence => "evidence",
            Self::Both => "both",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropConfig {
    /// Retention of a node's own strength in vacuity propagation.
    pub gamma1: f64,
    pub k1: usize,
    /// Teleport weight back to the initial α in evidence propagation.
    pub gamma2: f64,
    pub k2: usize,
    pub mode: PropMode,
}

impl Default for PropConfig {
    fn default() -> Self {
        Self { gamma1: 0.5, k1: 2, gamma2: 0.1, k2: 10, mode: PropMode::None }
    }
}

impl PropConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma1) || !(0.0..=1.0).contains(&self.gamma2) {
            return Err(Error::Config(format!(
                "propagation weights must lie in [0, 1], got gamma1={} gamma2={}",
                self.gamma1, self.gamma2
            )));
        }
        Ok(())
    }
}

/// `k` steps of `α₀ ← γ α₀ + (1 − γ) D⁻¹ A α₀`. Isolated nodes have a
/// zero aggregate, so they decay by `γ` per step.
pub fn vacuity_prop(strengths: &[f64], graph: &Graph, gamma: f64, k: usize) -> Vec<f64> {
    let rw = graph.normalize(NormKind::RwNoselfloop).matrix;
    let mut s = strengths.to_vec();
    for _ in 0..k {
        let agg = rw.mul_vec(&s);
        for (v, a) in s.iter_mut().zip(agg) {
            *v = gamma * *v + (1.0 - gamma) * a;
        }
    }
    s
}

/// `k` steps of `α ← (1 − γ) Â α + γ α⁰` with `Â` the self-looped symmetric
/// normalization.
pub fn evidence_prop(alpha0: &Matrix, graph: &Graph, gamma: f64, k: usize) -> Result<Matrix> {
    let a_hat = graph.normalize(NormKind::SymSelfloop).matrix;
    let mut alpha = alpha0.clone();
    for _ in 0..k {
        let mut next = a_hat.mul_dense(&alpha)?;
        for (v, a0) in next.as_mut_slice().iter_mut().zip(alpha0.as_slice()) {
            *v = (1.0 - gamma) * *v + gamma * a0;
        }
        alpha = next;
    }
    Ok(alpha)
}

/// Rescales each row of `alpha` to the given strength, keeping `p̄`.
fn rescale_rows(alpha: &Matrix, strengths: &[f64]) -> Matrix {
    let mut out = alpha.clone();
    for (i, &target) in strengths.iter().enumerate() {
        let s: f64 = out.row(i).iter().sum();
        for v in out.row_mut(i) {
            *v *= target / s;
        }
    }
    out
}

pub fn propagate(opinion: &DirichletOpinion, graph: &Graph, cfg: &PropConfig) -> Result<DirichletOpinion> {
    cfg.validate()?;
    if opinion.num_nodes() != graph.num_nodes() {
        return Err(Error::Shape(format!(
            "opinion over {} nodes for a graph of {}",
            opinion.num_nodes(),
            graph.num_nodes()
        )));
    }
    let vacuity = |alpha: &Matrix| -> Result<DirichletOpinion> {
        let s = vacuity_prop(&alpha.row_sums(), graph, cfg.gamma1, cfg.k1);
        DirichletOpinion::new(rescale_rows(alpha, &s))
    };
    match cfg.mode {
        PropMode::None => Ok(opinion.clone()),
        PropMode::Vacuity => vacuity(opinion.alpha()),
        PropMode::Evidence => DirichletOpinion::new(evidence_prop(opinion.alpha(), graph, cfg.gamma2, cfg.k2)?),
        PropMode::Both => vacuity(&evidence_prop(opinion.alpha(), graph, cfg.gamma2, cfg.k2)?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path2() -> Graph {
        Graph::from_edges(Matrix::zeros(2, 1), &[(0, 1)], vec![None; 2], 2).unwrap().0
    }

    fn cycle(n: usize) -> Graph {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Graph::from_edges(Matrix::zeros(n, 1), &edges, vec![None; n], 1).unwrap().0
    }

    #[test]
    fn vacuity_identities() {
        let g = cycle(5);
        let s = [3.0, 4.0, 9.0, 2.5, 7.0];
        assert_eq!(vacuity_prop(&s, &g, 1.0, 7), s.to_vec());
        let flat = vacuity_prop(&[6.0; 5], &g, 0.5, 3);
        assert!(flat.iter().all(|&v| (v - 6.0).abs() < 1e-15));
        let mixed = vacuity_prop(&s, &g, 0.3, 4);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!((mean(&mixed) - mean(&s)).abs() < 1e-12);
    }

    #[test]
    fn isolated_node_decays_by_gamma() {
        let g = Graph::from_edges(Matrix::zeros(1, 1), &[], vec![None], 1).unwrap().0;
        assert_eq!(vacuity_prop(&[8.0], &g, 0.5, 2), vec![2.0]);
    }

    #[test]
    fn evidence_identity_at_full_teleport() {
        let g = path2();
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(evidence_prop(&a, &g, 1.0, 5).unwrap(), a);
    }

    #[test]
    fn mode_none_and_vacuity_preserve_what_they_promise() {
        let g = path2();
        let op = DirichletOpinion::new(Matrix::from_rows(&[vec![3.0, 1.0], vec![0.5, 1.5]]).unwrap()).unwrap();
        let cfg = PropConfig { mode: PropMode::None, ..PropConfig::default() };
        assert_eq!(propagate(&op, &g, &cfg).unwrap(), op);
        let cfg = PropConfig { mode: PropMode::Vacuity, k1: 1, ..PropConfig::default() };
        let out = propagate(&op, &g, &cfg).unwrap();
        let (p0, p1) = (op.expected_probs(), out.expected_probs());
        assert!(p0.max_abs_diff(&p1) < 1e-15);
        assert_eq!(out.predictions(), op.predictions());
        assert_eq!(out.strengths(), vec![3.0, 3.0]);
    }

    #[test]
    fn rejects_bad_weights() {
        let g = path2();
        let op = DirichletOpinion::new(Matrix::filled(2, 2, 1.0)).unwrap();
        let cfg = PropConfig { gamma1: 1.5, mode: PropMode::Vacuity, ..PropConfig::default() };
        assert!(propagate(&op, &g, &cfg).is_err());
    }
}
