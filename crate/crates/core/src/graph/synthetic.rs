use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Graph;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve, Matrix};

/// Gaussian latent world: ID classes at `-mu` (label −1) and `+mu` (label +1),
/// OOD class at the origin (label 0), shared covariance `sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSpec {
    mu: Vec<f64>,
    sigma: Matrix,
    chol: Matrix,
}

impl GaussianSpec {
    pub fn new(mu: Vec<f64>, sigma: Matrix) -> Result<Self> {
        if sigma.shape() != (mu.len(), mu.len()) {
            return Err(Error::Shape(format!(
                "covariance {:?} does not match mean of dimension {}",
                sigma.shape(),
                mu.len()
            )));
        }
        let chol = cholesky(&sigma)?;
        Ok(Self { mu, sigma, chol })
    }

    /// `Σ = I` and `μ = norm · e₁`.
    pub fn isotropic(dim: usize, mu_norm: f64) -> Self {
        assert!(dim > 0, "dimension must be positive");
        let mut mu = vec![0.0; dim];
        mu[0] = mu_norm;
        Self::new(mu, Matrix::identity(dim)).expect("identity is SPD")
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma(&self) -> &Matrix {
        &self.sigma
    }

    pub fn cholesky_factor(&self) -> &Matrix {
        &self.chol
    }

    /// `Σ⁻¹ μ`.
    pub fn sigma_inv_mu(&self) -> Vec<f64> {
        cholesky_solve(&self.chol, &self.mu)
    }

    /// Squared Mahalanobis norm `μᵀ Σ⁻¹ μ`.
    pub fn separation_sq(&self) -> f64 {
        crate::linalg::dot(&self.mu, &self.sigma_inv_mu())
    }

    /// One draw from `N(sign · μ, Σ)`, written into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, sign: f64, rng: &mut R, out: &mut [f64]) {
        sample_normal(&self.mu, sign, &self.chol, rng, out);
    }
}

fn sample_normal<R: Rng + ?Sized>(mean: &[f64], scale: f64, chol: &Matrix, rng: &mut R, out: &mut [f64]) {
    let d = mean.len();
    let eps: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    for i in 0..d {
        let mut v = scale * mean[i];
        for (k, e) in eps.iter().enumerate().take(i + 1) {
            v += chol[(i, k)] * e;
        }
        out[i] = v;
    }
}

/// Draws `n_per_class` rows from each of `N(−μ,Σ)`, `N(+μ,Σ)` and, when
/// `include_ood`, `N(0,Σ)`. Labels are `−1`, `+1`, `0`, in that block order.
pub fn sample_gaussian_world(
    spec: &GaussianSpec,
    n_per_class: usize,
    include_ood: bool,
    seed: u64,
) -> (Matrix, Vec<i8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes: &[i8] = if include_ood { &[-1, 1, 0] } else { &[-1, 1] };
    let mut z = Matrix::zeros(classes.len() * n_per_class, spec.dim());
    let mut labels = Vec::with_capacity(z.rows());
    for (b, &y) in classes.iter().enumerate() {
        for r in 0..n_per_class {
            spec.sample_into(f64::from(y), &mut rng, z.row_mut(b * n_per_class + r));
            labels.push(y);
        }
    }
    (z, labels)
}

/// Contextual stochastic block model: one Gaussian per class with shared
/// covariance, edges independent with `p_in` inside a class and `p_out` across.
#[derive(Debug, Clone, PartialEq)]
pub struct CsbmConfig {
    pub means: Vec<Vec<f64>>,
    pub sigma: Matrix,
    pub n_per_class: usize,
    pub p_in: f64,
    pub p_out: f64,
}

impl CsbmConfig {
    /// ID class `k` centred at `mu_norm · e_k` with `Σ = I`; when
    /// `include_ood` an extra last class sits at the origin.
    pub fn benchmark(
        dim: usize,
        mu_norm: f64,
        n_id_classes: usize,
        include_ood: bool,
        n_per_class: usize,
        p_in: f64,
        p_out: f64,
    ) -> Result<Self> {
        if n_id_classes > dim {
            return Err(Error::Config(format!(
                "{n_id_classes} orthogonal class means need dim >= {n_id_classes}, got {dim}"
            )));
        }
        let mut means: Vec<Vec<f64>> = (0..n_id_classes)
            .map(|k| {
                let mut m = vec![0.0; dim];
                m[k] = mu_norm;
                m
            })
            .collect();
        if include_ood {
            means.push(vec![0.0; dim]);
        }
        Ok(Self { means, sigma: Matrix::identity(dim), n_per_class, p_in, p_out })
    }
}

/// Samples a CSBM graph. Nodes are laid out class by class.
pub fn generate_csbm(cfg: &CsbmConfig, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&cfg.p_in) || !(0.0..=cfg.p_in).contains(&cfg.p_out) {
        return Err(Error::Config(format!(
            "edge probabilities must satisfy 0 <= p_out <= p_in <= 1, got p_in={} p_out={}",
            cfg.p_in, cfg.p_out
        )));
    }
    let dim = cfg.sigma.rows();
    if let Some(m) = cfg.means.iter().find(|m| m.len() != dim) {
        return Err(Error::Shape(format!("class mean of dimension {} with {dim}x{dim} covariance", m.len())));
    }
    let chol = cholesky(&cfg.sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.means.len() * cfg.n_per_class;
    let mut x = Matrix::zeros(n, dim);
    let mut labels = Vec::with_capacity(n);
    for (c, mean) in cfg.means.iter().enumerate() {
        for r in 0..cfg.n_per_class {
            sample_normal(mean, 1.0, &chol, &mut rng, x.row_mut(c * cfg.n_per_class + r));
            labels.push(Some(c));
        }
    }
    let edges = sample_block_edges(&labels, cfg.p_in, cfg.p_out, &mut rng);
    Ok(Graph::from_edges(x, &edges, labels, cfg.means.len())?.0)
}

fn sample_block_edges<R: Rng>(labels: &[Option<usize>], p_in: f64, p_out: f64, rng: &mut R) -> Vec<(usize, usize)> {
    let n = labels.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if labels[i] == labels[j] { p_in } else { p_out };
            if p > 0.0 && rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// CSBM over the Gaussian latent world. Labels −1/+1/0 become classes 0/1/2.
pub fn generate_csbm_graph(
    spec: &GaussianSpec,
    n_per_class: usize,
    p_in: f64,
    p_out: f64,
    include_ood: bool,
    seed: u64,
) -> Result<Graph> {
    let neg: Vec<f64> = spec.mu().iter().map(|v| -v).collect();
    let mut means = vec![neg, spec.mu().to_vec()];
    if include_ood {
        means.push(vec![0.0; spec.dim()]);
    }
    let cfg = CsbmConfig { means, sigma: spec.sigma().clone(), n_per_class, p_in, p_out };
    generate_csbm(&cfg, seed)
}
