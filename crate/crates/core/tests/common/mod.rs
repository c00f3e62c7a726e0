//! Independent oracles shared by the integration tests and the acceptance
//! target. Nothing here calls into the code it checks.

#![allow(dead_code)]

pub mod grad;

use epn::graph::Graph;
use epn::linalg::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> Matrix {
    let n = Normal::new(0.0, scale).unwrap();
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| n.sample(rng)).collect()).unwrap()
}

/// Random row-stochastic matrix with strictly positive entries.
pub fn random_probs(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for i in 0..rows {
        let raw: Vec<f64> = (0..cols).map(|_| rng.random_range(0.05..1.0)).collect();
        let s: f64 = raw.iter().sum();
        for (v, r) in m.row_mut(i).iter_mut().zip(raw) {
            *v = r / s;
        }
    }
    m
}

/// Pair-counting AUROC: `P(s⁺ > s⁻) + ½ P(s⁺ = s⁻)`.
pub fn brute_auroc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut num, mut pairs) = (0.0, 0.0);
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / pairs
}

/// Step-wise average precision from the explicit PR curve: one point per
/// distinct threshold, predicted positive when `score >= t`.
pub fn brute_aupr(scores: &[f64], labels: &[bool]) -> f64 {
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let n_pos = labels.iter().filter(|&&l| l).count() as f64;
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    for t in thresholds {
        let tp = scores.iter().zip(labels).filter(|(&s, &l)| s >= t && l).count() as f64;
        let predicted = scores.iter().filter(|&&s| s >= t).count() as f64;
        let recall = tp / n_pos;
        area += (recall - prev_recall) * (tp / predicted);
        prev_recall = recall;
    }
    area
}

/// Monte Carlo mean and standard error of `−ln p_y` for `p ~ Dir(α)`,
/// sampled by normalizing independent `Gamma(α_c, 1)` draws.
pub fn mc_dirichlet_nll(alpha: &[f64], y: usize, n: usize, seed: u64) -> (f64, f64) {
    let gammas: Vec<Gamma<f64>> = alpha.iter().map(|&a| Gamma::new(a, 1.0).unwrap()).collect();
    let mut r = rng(seed);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    let mut g = vec![0.0; alpha.len()];
    for _ in 0..n {
        for (v, d) in g.iter_mut().zip(&gammas) {
            *v = d.sample(&mut r);
        }
        let total: f64 = g.iter().sum();
        let nll = total.ln() - g[y].ln();
        sum += nll;
        sum_sq += nll * nll;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = (sum_sq / nf - mean * mean) * nf / (nf - 1.0);
    (mean, (var / nf).sqrt())
}

/// Central-difference gradient of `f` at `x`.
pub fn numeric_grad(x: &Matrix, h: f64, mut f: impl FnMut(&Matrix) -> f64) -> Matrix {
    let mut g = Matrix::zeros(x.rows(), x.cols());
    let mut xp = x.clone();
    for k in 0..x.len() {
        let orig = x.as_slice()[k];
        xp.as_mut_slice()[k] = orig + h;
        let up = f(&xp);
        xp.as_mut_slice()[k] = orig - h;
        let down = f(&xp);
        xp.as_mut_slice()[k] = orig;
        g.as_mut_slice()[k] = (up - down) / (2.0 * h);
    }
    g
}

/// Largest `|a − n| / max(|a|, |n|, 1e-3)` over all entries.
pub fn max_rel_err(analytic: &Matrix, numeric: &Matrix) -> f64 {
    analytic
        .as_slice()
        .iter()
        .zip(numeric.as_slice())
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-3))
        .fold(0.0, f64::max)
}

/// `Σ W ⊙ X`, the scalar used to turn a matrix-valued op into a loss.
pub fn weighted_sum(w: &Matrix, x: &Matrix) -> f64 {
    w.as_slice().iter().zip(x.as_slice()).map(|(a, b)| a * b).sum()
}

pub fn path2(num_classes: usize) -> Graph {
    Graph::from_edges(Matrix::zeros(2, 1), &[(0, 1)], vec![None; 2], num_classes).unwrap().0
}

/// Connected random graph: a ring plus Erdős–Rényi chords.
pub fn random_connected_graph(n: usize, p: f64, seed: u64) -> Graph {
    let mut r = rng(seed);
    let mut edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    for i in 0..n {
        for j in i + 2..n {
            if r.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Graph::from_edges(Matrix::zeros(n, 1), &edges, vec![None; n], 1).unwrap().0
}

/// Log density of `N(m, I)` at `x`, dropping the shared normalizer.
fn log_iso_normal(x: &[f64], m: &[f64]) -> f64 {
    -0.5 * x.iter().zip(m).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
}

/// Bayes-optimal feature-only OOD score for the CSBM benchmark world:
/// `log N(x; ood, I) − log mean_k N(x; μ_k, I)`.
pub fn oracle_ood_score(x: &[f64], id_means: &[Vec<f64>], ood_mean: &[f64]) -> f64 {
    let logs: Vec<f64> = id_means.iter().map(|m| log_iso_normal(x, m)).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = top + (logs.iter().map(|l| (l - top).exp()).sum::<f64>() / logs.len() as f64).ln();
    log_iso_normal(x, ood_mean) - lse
}

/// One randomized UCE trial: the closed form against Monte Carlo, and the
/// `2/e_y` bound on the binary single-layer ENN evidence `(e^{−v}, e^{v})`
/// the bound is stated for.
#[derive(Debug, Clone)]
pub struct UceTrial {
    pub alpha: Vec<f64>,
    pub y: usize,
    pub closed_form: f64,
    pub mc_mean: f64,
    pub mc_se: f64,
    pub enn_evidence: [f64; 2],
    pub enn_loss: f64,
    pub enn_bound: f64,
}

impl UceTrial {
    pub fn within_3_se(&self) -> bool {
        (self.closed_form - self.mc_mean).abs() <= 3.0 * self.mc_se
    }

    pub fn bound_holds(&self) -> bool {
        self.enn_bound >= self.enn_loss
    }
}

pub fn uce_trials(n_trials: usize, n_draws: usize, seed: u64) -> Vec<UceTrial> {
    let mut r = rng(seed);
    (0..n_trials)
        .map(|t| {
            let c = r.random_range(2..=4);
            let alpha: Vec<f64> = (0..c).map(|_| r.random_range(1.0..20.0)).collect();
            let y = r.random_range(0..c);
            let evidence: Vec<f64> = alpha.iter().map(|a| a - 1.0).collect();
            let (mc_mean, mc_se) = mc_dirichlet_nll(&alpha, y, n_draws, seed.wrapping_add(1 + t as u64));
            let v: f64 = r.random_range(-4.0..4.0);
            let yb = r.random_range(0..2);
            let enn = [(-v).exp(), v.exp()];
            UceTrial {
                closed_form: epn::edl::uce_loss(&evidence, y),
                alpha,
                y,
                mc_mean,
                mc_se,
                enn_evidence: enn,
                enn_loss: epn::edl::uce_loss(&enn, yb),
                enn_bound: epn::edl::uce_upper_bound(&enn, yb),
            }
        })
        .collect()
}

/// A labeled score fixture with deliberate ties.
pub fn score_fixture(n: usize, r: &mut ChaCha8Rng) -> (Vec<f64>, Vec<bool>) {
    loop {
        let scores: Vec<f64> = (0..n).map(|_| f64::from(r.random_range(0..6u8)) / 5.0).collect();
        let labels: Vec<bool> = (0..n).map(|_| r.random::<bool>()).collect();
        if labels.iter().any(|&l| l) && labels.iter().any(|&l| !l) {
            return (scores, labels);
        }
    }
}

/// Worst disagreement of the library AUROC/AUPR with the brute-force
/// oracles over random tie-heavy fixtures of 2 to 20 points.
pub fn metric_oracle_gap(n_fixtures: usize, seed: u64) -> (f64, f64) {
    let mut r = rng(seed);
    let (mut roc, mut pr) = (0.0f64, 0.0f64);
    for k in 0..n_fixtures {
        let (s, l) = score_fixture(2 + k % 19, &mut r);
        roc = roc.max((epn::eval::auroc(&s, &l).unwrap() - brute_auroc(&s, &l)).abs());
        pr = pr.max((epn::eval::aupr(&s, &l).unwrap() - brute_aupr(&s, &l)).abs());
    }
    (roc, pr)
}

/// Hand-computed ECE (10 bins) and Brier fixtures: `(probs, labels, ece, brier)`.
pub fn calibration_fixtures() -> Vec<(Matrix, Vec<usize>, f64, f64)> {
    let m = |rows: &[[f64; 2]]| Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap();
    vec![
        (m(&[[1.0, 0.0], [0.0, 1.0]]), vec![0, 1], 0.0, 0.0),
        (m(&[[1.0, 0.0], [0.0, 1.0]]), vec![0, 0], 0.5, 1.0),
        (m(&[[0.5, 0.5], [0.5, 0.5]]), vec![0, 1], 0.0, 0.5),
        // bins: 0.95 ✓ | 0.85 ✗ | 0.62 ✓, 0.70 ✓ | 0.55 ✓
        (
            m(&[[0.95, 0.05], [0.85, 0.15], [0.62, 0.38], [0.55, 0.45], [0.3, 0.7]]),
            vec![0, 1, 0, 0, 1],
            (0.05 + 0.85 + 0.68 + 0.45) / 5.0,
            (0.005 + 1.445 + 0.2888 + 0.405 + 0.18) / 5.0,
        ),
    ]
}

/// Hand-computed propagation fixtures on the 2-node path. Returns the
/// largest absolute deviation.
pub fn propagation_fixture_gap() -> f64 {
    use epn::edl::DirichletOpinion;
    use epn::propagation::{evidence_prop, propagate, vacuity_prop, PropConfig, PropMode};
    let g = path2(2);
    let mut gap: f64 = 0.0;

    let v = vacuity_prop(&[4.0, 2.0], &g, 0.5, 1);
    gap = gap.max((v[0] - 3.0).abs()).max((v[1] - 3.0).abs());

    let a0 = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
    let e = evidence_prop(&a0, &g, 0.5, 1).unwrap();
    let want = Matrix::from_rows(&[vec![1.75, 1.25], vec![1.25, 1.75]]).unwrap();
    gap = gap.max(e.max_abs_diff(&want));

    // both: evidence step gives [[2.5, 1], [1.5, 1]] (strengths 3.5, 2.5);
    // the vacuity step moves both strengths to 3, keeping each row's shares
    let op = DirichletOpinion::new(Matrix::from_rows(&[vec![3.0, 1.0], vec![1.0, 1.0]]).unwrap()).unwrap();
    let cfg = PropConfig { gamma1: 0.5, k1: 1, gamma2: 0.5, k2: 1, mode: PropMode::Both };
    let both = propagate(&op, &g, &cfg).unwrap();
    let want = Matrix::from_rows(&[vec![15.0 / 7.0, 6.0 / 7.0], vec![1.8, 1.2]]).unwrap();
    gap.max(both.alpha().max_abs_diff(&want))
}

/// `max |α^{200} − α^{199}|` of evidence propagation on a connected random
/// 10-node graph.
pub fn evidence_prop_tail(gamma: f64, seed: u64) -> f64 {
    let g = random_connected_graph(10, 0.3, seed);
    let mut r = rng(seed);
    let a0 = Matrix::from_vec(10, 3, (0..30).map(|_| r.random_range(0.5..20.0)).collect()).unwrap();
    let a199 = epn::propagation::evidence_prop(&a0, &g, gamma, 199).unwrap();
    let a200 = epn::propagation::evidence_prop(&a0, &g, gamma, 200).unwrap();
    a200.max_abs_diff(&a199)
}
