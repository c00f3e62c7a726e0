use serde::{Deserialize, Serialize};

use super::ProbeOutput;
use crate::linalg::Matrix;
use crate::specfun::{digamma, trigamma};

const PROB_FLOOR: f64 = 1e-12;
const CONFIDENCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PclConfig {
    pub e_id: f64,
    pub e_ood: f64,
}

impl Default for PclConfig {
    fn default() -> Self {
        Self { e_id: 100.0, e_ood: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    /// Weight of the intra-class evidence term.
    pub lambda1: f64,
    /// Weight of the positive-confidence term.
    pub lambda2: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { lambda1: 1e-2, lambda2: 1e-2 }
    }
}

impl LossWeights {
    pub const NONE: Self = Self { lambda1: 0.0, lambda2: 0.0 };
}

/// `ψ(e + C) − ψ((e + C)·p̃_y)` with `p̃_y` floored at 1e-12.
pub fn epn_uce_loss(e_total: f64, y: usize, probs: &[f64]) -> f64 {
    let s = e_total + probs.len() as f64;
    digamma(s) - digamma(s * probs[y].max(PROB_FLOOR))
}

/// Derivative of [`epn_uce_loss`] with respect to `e_total`.
pub fn epn_uce_loss_grad(e_total: f64, y: usize, probs: &[f64]) -> f64 {
    let s = e_total + probs.len() as f64;
    let py = probs[y].max(PROB_FLOOR);
    trigamma(s) - py * trigamma(s * py)
}

/// `‖(C + e)·p̃ − q‖²`.
pub fn ice_loss(e_total: f64, probs: &[f64], q: &[f64]) -> f64 {
    let s = e_total + probs.len() as f64;
    probs.iter().zip(q).map(|(p, q)| (s * p - q).powi(2)).sum()
}

/// Returns `(∂/∂e, ∂/∂q)` of [`ice_loss`].
pub fn ice_loss_grad(e_total: f64, probs: &[f64], q: &[f64]) -> (f64, Vec<f64>) {
    let s = e_total + probs.len() as f64;
    let resid: Vec<f64> = probs.iter().zip(q).map(|(p, q)| s * p - q).collect();
    let de = 2.0 * resid.iter().zip(probs).map(|(r, p)| r * p).sum::<f64>();
    (de, resid.into_iter().map(|r| -2.0 * r).collect())
}

fn pcl_weight(r: f64) -> f64 {
    let r = r.max(CONFIDENCE_FLOOR);
    (1.0 - r) / r
}

/// `max(0, e_id − e)² + ((1 − r)/r)·max(0, e − e_ood)²`, `r` floored at 1e-6.
pub fn pcl_loss(e_total: f64, r: f64, cfg: &PclConfig) -> f64 {
    (cfg.e_id - e_total).max(0.0).powi(2) + pcl_weight(r) * (e_total - cfg.e_ood).max(0.0).powi(2)
}

pub fn pcl_loss_grad(e_total: f64, r: f64, cfg: &PclConfig) -> f64 {
    -2.0 * (cfg.e_id - e_total).max(0.0) + 2.0 * pcl_weight(r) * (e_total - cfg.e_ood).max(0.0)
}

/// Confidence `r = max_c p̃_c` per node.
pub fn confidence(probs: &Matrix) -> Vec<f64> {
    probs.iter_rows().map(|p| p.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect()
}

/// The three components of the probe objective and their weighted sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTerms {
    pub uce: f64,
    pub ice: f64,
    pub pcl: f64,
    pub total: f64,
}

/// Mean EPN-UCE over the labeled `targets` plus `λ₁·mean ICE + λ₂·mean PCL`
/// over every node. Also returns the gradients with respect to `e_total`
/// and `q`.
pub fn epn_objective(
    out: &ProbeOutput,
    targets: &[(usize, usize)],
    weights: &LossWeights,
    pcl: &PclConfig,
) -> (ObjectiveTerms, Vec<f64>, Matrix) {
    let n = out.e_total.len();
    let mut g_e = vec![0.0; n];
    let mut g_q = Matrix::zeros(out.q.rows(), out.q.cols());
    let mut uce = 0.0;
    if !targets.is_empty() {
        let m = targets.len() as f64;
        for &(i, y) in targets {
            let p = out.probs.row(i);
            uce += epn_uce_loss(out.e_total[i], y, p);
            g_e[i] += epn_uce_loss_grad(out.e_total[i], y, p) / m;
        }
        uce /= m;
    }
    let (mut ice, mut pcl_sum) = (0.0, 0.0);
    let use_ice = weights.lambda1 != 0.0;
    let use_pcl = weights.lambda2 != 0.0;
    if n > 0 && (use_ice || use_pcl) {
        let nf = n as f64;
        for i in 0..n {
            let (e, p) = (out.e_total[i], out.probs.row(i));
            if use_ice {
                ice += ice_loss(e, p, out.q.row(i));
                let (de, dq) = ice_loss_grad(e, p, out.q.row(i));
                g_e[i] += weights.lambda1 * de / nf;
                for (g, d) in g_q.row_mut(i).iter_mut().zip(dq) {
                    *g += weights.lambda1 * d / nf;
                }
            }
            if use_pcl {
                let r = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                pcl_sum += pcl_loss(e, r, pcl);
                g_e[i] += weights.lambda2 * pcl_loss_grad(e, r, pcl) / nf;
            }
        }
        ice /= nf;
        pcl_sum /= nf;
    }
    let total = uce + weights.lambda1 * ice + weights.lambda2 * pcl_sum;
    (ObjectiveTerms { uce, ice, pcl: pcl_sum, total }, g_e, g_q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uce_examples() {
        assert!((epn_uce_loss(0.0, 0, &[0.5, 0.5]) - 1.0).abs() < 1e-13);
        let far = epn_uce_loss(1e8, 1, &[0.5, 0.5]);
        assert!((far - std::f64::consts::LN_2).abs() < 1e-7);
        let mut prev = f64::INFINITY;
        for k in 0..=100 {
            let v = epn_uce_loss(k as f64, 0, &[0.3, 0.7]);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn ice_examples() {
        assert_eq!(ice_loss(2.0, &[0.5, 0.5], &[1.0, 1.0]), 2.0);
        assert_eq!(ice_loss(2.0, &[0.5, 0.5], &[2.0, 2.0]), 0.0);
    }

    #[test]
    fn pcl_examples() {
        let cfg = PclConfig::default();
        assert_eq!(pcl_loss(150.0, 1.0, &cfg), 0.0);
        assert_eq!(pcl_loss(50.0, 1.0, &cfg), 2500.0);
        assert_eq!(pcl_loss(150.0, 0.5, &cfg), 22500.0);
        assert!(pcl_loss(10.0, 0.0, &cfg).is_finite());
    }

    #[test]
    fn scalar_gradients_match_finite_differences() {
        let h = 1e-6;
        let p = [0.2, 0.5, 0.3];
        let q = [1.0, 4.0, 0.5];
        for &e in &[0.0, 0.7, 3.0, 120.0] {
            let num = (epn_uce_loss(e + h, 1, &p) - epn_uce_loss(e - h, 1, &p)) / (2.0 * h);
            assert!((num - epn_uce_loss_grad(e, 1, &p)).abs() < 1e-7, "e={e}: {num} vs {}", epn_uce_loss_grad(e, 1, &p));
            let num = (ice_loss(e + h, &p, &q) - ice_loss(e - h, &p, &q)) / (2.0 * h);
            assert!((num - ice_loss_grad(e, &p, &q).0).abs() < 1e-5 * num.abs().max(1.0));
            let cfg = PclConfig::default();
            let num = (pcl_loss(e + h, 0.6, &cfg) - pcl_loss(e - h, 0.6, &cfg)) / (2.0 * h);
            assert!((num - pcl_loss_grad(e, 0.6, &cfg)).abs() < 1e-4 * num.abs().max(1.0));
        }
    }
}
