//! Dirichlet opinions, their uncertainty measures, the evidential losses and
//! the directly trained evidential GCN.

mod egnn;
mod loss;

pub use egnn::{egnn_loss, train_egnn, EgnnConfig, EgnnHead, EvidenceActivation};
pub use loss::{
    expected_ce, expected_ce_grad, kl_to_uniform, kl_to_uniform_grad, uce_loss, uce_loss_grad, uce_upper_bound,
};

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Per-node Dirichlet concentration parameters.
///
/// Entries only need to be nonnegative: probe outputs `(C + e)·p̃` may have
/// components below one.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletOpinion {
    alpha: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyScores {
    /// `−max_c p̄_c`.
    pub aleatoric: Vec<f64>,
    /// `C / α₀`.
    pub epistemic: Vec<f64>,
}

impl DirichletOpinion {
    pub fn new(alpha: Matrix) -> Result<Self> {
        if alpha.cols() == 0 {
            return Err(Error::Domain("opinion over zero classes".into()));
        }
        for (i, row) in alpha.iter_rows().enumerate() {
            if row.iter().any(|&a| !a.is_finite() || a < 0.0) {
                return Err(Error::Domain(format!("node {i}: concentration must be finite and nonnegative")));
            }
            if row.iter().sum::<f64>() <= 0.0 {
                return Err(Error::Domain(format!("node {i}: zero Dirichlet strength")));
            }
        }
        Ok(Self { alpha })
    }

    /// `α = e + 1`.
    pub fn from_evidence(evidence: &Matrix) -> Result<Self> {
        Self::new(evidence.map(|e| e + 1.0))
    }

    pub fn alpha(&self) -> &Matrix {
        &self.alpha
    }

    pub fn into_alpha(self) -> Matrix {
        self.alpha
    }

    pub fn num_nodes(&self) -> usize {
        self.alpha.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.alpha.cols()
    }

    pub fn evidence(&self) -> Matrix {
        self.alpha.map(|a| a - 1.0)
    }

    /// `α₀` per node.
    pub fn strengths(&self) -> Vec<f64> {
        self.alpha.row_sums()
    }

    /// `α₀ − C` per node.
    pub fn total_evidence(&self) -> Vec<f64> {
        let c = self.num_classes() as f64;
        self.strengths().into_iter().map(|s| s - c).collect()
    }

    /// `p̄ = α / α₀`.
    pub fn expected_probs(&self) -> Matrix {
        self.expected_probs_with_offset(0.0)
    }

    /// `α / (α₀ + offset)`; only meaningful for `offset = 0` as a distribution.
    pub fn expected_probs_with_offset(&self, offset: f64) -> Matrix {
        let mut p = self.alpha.clone();
        for i in 0..p.rows() {
            let s: f64 = p.row(i).iter().sum::<f64>() + offset;
            for v in p.row_mut(i) {
                *v /= s;
            }
        }
        p
    }

    pub fn predictions(&self) -> Vec<usize> {
        self.alpha.iter_rows().map(argmax).collect()
    }

    pub fn uncertainties(&self) -> UncertaintyScores {
        self.uncertainties_with_offset(0.0)
    }

    /// Aleatoric uncertainty with `offset` added to the strength; the
    /// epistemic part always uses the plain strength.
    pub fn uncertainties_with_offset(&self, offset: f64) -> UncertaintyScores {
        let p = self.expected_probs_with_offset(offset);
        let aleatoric = p.iter_rows().map(|r| -r.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
        let c = self.num_classes() as f64;
        let epistemic = self.strengths().into_iter().map(|s| c / s).collect();
        UncertaintyScores { aleatoric, epistemic }
    }

    /// `node_id, alpha_0..alpha_{C-1}, u_alea, u_epi`.
    pub fn to_csv(&self, scores: &UncertaintyScores) -> String {
        let mut s = String::from("node_id");
        for c in 0..self.num_classes() {
            write!(s, ",alpha_{c}").expect("writing to a String cannot fail");
        }
        s.push_str(",u_alea,u_epi\n");
        for (i, row) in self.alpha.iter_rows().enumerate() {
            write!(s, "{i}").expect("writing to a String cannot fail");
            for a in row {
                write!(s, ",{a:?}").expect("writing to a String cannot fail");
            }
            writeln!(s, ",{:?},{:?}", scores.aleatoric[i], scores.epistemic[i]).expect("writing to a String cannot fail");
        }
        s
    }
}

/// Index of the first maximal entry.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = k;
        }
    }
    best
}
