use crate::specfun::{digamma, ln_gamma, trigamma};

/// Expected cross-entropy under `Dir(e + 1)` for true class `y`:
/// `ψ(Σe + C) − ψ(e_y + 1)`.
pub fn uce_loss(evidence: &[f64], y: usize) -> f64 {
    let c = evidence.len() as f64;
    let total: f64 = evidence.iter().sum();
    digamma(total + c) - digamma(evidence[y] + 1.0)
}

/// Gradient of [`uce_loss`] with respect to the evidence vector.
pub fn uce_loss_grad(evidence: &[f64], y: usize) -> Vec<f64> {
    let c = evidence.len() as f64;
    let common = trigamma(evidence.iter().sum::<f64>() + c);
    let mut g = vec![common; evidence.len()];
    g[y] -= trigamma(evidence[y] + 1.0);
    g
}

/// `2 / e_y`, or `+∞` when the true class has no evidence.
pub fn uce_upper_bound(evidence: &[f64], y: usize) -> f64 {
    let ey = evidence[y];
    if ey > 0.0 {
        2.0 / ey
    } else {
        f64::INFINITY
    }
}

/// `Σ_c y_c (ψ(α₀) − ψ(α_c))` for a one-hot `y`.
pub fn expected_ce(alpha: &[f64], y: usize) -> f64 {
    digamma(alpha.iter().sum()) - digamma(alpha[y])
}

pub fn expected_ce_grad(alpha: &[f64], y: usize) -> Vec<f64> {
    let mut g = vec![trigamma(alpha.iter().sum()); alpha.len()];
    g[y] -= trigamma(alpha[y]);
    g
}

/// `KL[Dir(α) ‖ Dir(1)]`.
pub fn kl_to_uniform(alpha: &[f64]) -> f64 {
    let c = alpha.len() as f64;
    let a0: f64 = alpha.iter().sum();
    let psi0 = digamma(a0);
    let mut kl = ln_gamma(a0) - ln_gamma(c);
    for &a in alpha {
        kl += -ln_gamma(a) + (a - 1.0) * (digamma(a) - psi0);
    }
    kl
}

/// `∂KL/∂α_j = (α_j − 1) ψ'(α_j) − (α₀ − C) ψ'(α₀)`.
pub fn kl_to_uniform_grad(alpha: &[f64]) -> Vec<f64> {
    let c = alpha.len() as f64;
    let a0: f64 = alpha.iter().sum();
    let common = (a0 - c) * trigamma(a0);
    alpha.iter().map(|&a| (a - 1.0) * trigamma(a) - common).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uce_examples() {
        assert!((uce_loss(&[0.0, 0.0], 0) - 1.0).abs() < 1e-13);
        assert!((uce_loss(&[0.0, 0.0, 0.0], 2) - 1.5).abs() < 1e-13);
        assert!((uce_loss(&[10.0, 0.0], 0) - 1.0 / 11.0).abs() < 1e-13);
        assert_eq!(uce_upper_bound(&[2.0, 5.0], 0), 1.0);
        assert_eq!(uce_upper_bound(&[1.0, 4.0], 1), 0.5);
        assert_eq!(uce_upper_bound(&[0.0, 4.0], 0), f64::INFINITY);
    }

    #[test]
    fn kl_examples() {
        assert!(kl_to_uniform(&[1.0, 1.0, 1.0]).abs() < 1e-13);
        let expected = std::f64::consts::LN_2 - 0.5;
        assert!((kl_to_uniform(&[2.0, 1.0]) - expected).abs() < 1e-13);
    }

    #[test]
    fn expected_ce_matches_uce_on_shifted_evidence() {
        let e = [0.3, 4.0, 1.5];
        let a: Vec<f64> = e.iter().map(|v| v + 1.0).collect();
        assert!((expected_ce(&a, 1) - uce_loss(&e, 1)).abs() < 1e-14);
    }
}
