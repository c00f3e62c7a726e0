//! Finite-difference suites for the differentiable pieces.

use epn::diff::{check_gradients, ops, Param};
use epn::epn::{epn_objective, LossWeights, OutputActivation, PclConfig, ProbeParams};
use epn::gnn::{cross_entropy, GcnModel};
use epn::graph::Graph;
use epn::linalg::{CsrMatrix, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{max_rel_err, numeric_grad, random_matrix, random_probs, rng, weighted_sum};

pub const H: f64 = 1e-5;

/// Entries bounded away from zero so the ReLU kink is never straddled.
fn away_from_zero(rows: usize, cols: usize, r: &mut ChaCha8Rng) -> Matrix {
    let m = random_matrix(rows, cols, 1.0, r);
    m.map(|v| v.signum() * (0.1 + v.abs()))
}

/// Worst relative error per op on random 5×4 inputs.
pub fn op_suite(seed: u64) -> Vec<(&'static str, f64)> {
    let mut r = rng(seed);
    let x = random_matrix(5, 4, 1.0, &mut r);
    let w = random_matrix(5, 4, 1.0, &mut r);
    let mut out = Vec::new();

    let b = random_matrix(4, 3, 1.0, &mut r);
    let wm = random_matrix(5, 3, 1.0, &mut r);
    let (ga, gb) = ops::matmul_backward(&x, &b, &wm).unwrap();
    out.push(("dense_matmul.lhs", max_rel_err(&ga, &numeric_grad(&x, H, |x| weighted_sum(&wm, &ops::matmul(x, &b).unwrap())))));
    out.push(("dense_matmul.rhs", max_rel_err(&gb, &numeric_grad(&b, H, |b| weighted_sum(&wm, &ops::matmul(&x, b).unwrap())))));

    let triplets: Vec<(usize, usize, f64)> = (0..5)
        .flat_map(|i| (0..5).map(move |j| (i, j)))
        .filter(|_| r.random::<f64>() < 0.5)
        .map(|(i, j)| (i, j, 0.3 + (i * 5 + j) as f64 / 25.0))
        .collect();
    let s = CsrMatrix::from_triplets(5, 5, &triplets).unwrap();
    let g = ops::spmm_backward(&s, &w).unwrap();
    out.push(("sparse_dense_matmul", max_rel_err(&g, &numeric_grad(&x, H, |x| weighted_sum(&w, &ops::spmm(&s, x).unwrap())))));

    let bias = random_matrix(1, 4, 1.0, &mut r);
    let (gx, gbias) = ops::add_row_bias_backward(&w);
    out.push((
        "add_row_bias.input",
        max_rel_err(&gx, &numeric_grad(&x, H, |x| weighted_sum(&w, &ops::add_row_bias(x, &bias).unwrap()))),
    ));
    out.push((
        "add_row_bias.bias",
        max_rel_err(&gbias, &numeric_grad(&bias, H, |b| weighted_sum(&w, &ops::add_row_bias(&x, b).unwrap()))),
    ));

    let xr = away_from_zero(5, 4, &mut r);
    let g = ops::relu_backward(&xr, &w).unwrap();
    out.push(("relu", max_rel_err(&g, &numeric_grad(&xr, H, |x| weighted_sum(&w, &ops::relu(x))))));

    let g = ops::exp_backward(&ops::exp(&x), &w).unwrap();
    out.push(("exp", max_rel_err(&g, &numeric_grad(&x, H, |x| weighted_sum(&w, &ops::exp(x))))));

    let g = ops::softplus_backward(&x, &w).unwrap();
    out.push(("softplus", max_rel_err(&g, &numeric_grad(&x, H, |x| weighted_sum(&w, &ops::softplus(x))))));

    // Re-seeding per call pins the mask, making the op linear in x.
    let drop = |x: &Matrix| ops::dropout(x, 0.5, true, &mut rng(seed ^ 0xd0));
    let (_, mask) = drop(&x);
    let g = ops::dropout_backward(mask.as_ref(), &w).unwrap();
    out.push(("dropout", max_rel_err(&g, &numeric_grad(&x, H, |x| weighted_sum(&w, &drop(x).0)))));

    let g = ops::row_softmax_backward(&ops::row_softmax(&x), &w).unwrap();
    out.push(("row_softmax", max_rel_err(&g, &numeric_grad(&x, H, |x| weighted_sum(&w, &ops::row_softmax(x))))));

    let g = ops::log_row_softmax_backward(&ops::log_row_softmax(&x), &w).unwrap();
    out.push((
        "log_row_softmax",
        max_rel_err(&g, &numeric_grad(&x, H, |x| weighted_sum(&w, &ops::log_row_softmax(x)))),
    ));
    out
}

/// `L = Σ W ⊙ softmax(X B)`: chained library backwards against the
/// hand-derived gradient `G Bᵀ` with `G_ij = p_ij (W_ij − Σ_k W_ik p_ik)`.
pub fn chain_check(seed: u64) -> f64 {
    let mut r = rng(seed);
    let x = random_matrix(5, 4, 1.0, &mut r);
    let b = random_matrix(4, 3, 1.0, &mut r);
    let w = random_matrix(5, 3, 1.0, &mut r);
    let p = ops::row_softmax(&ops::matmul(&x, &b).unwrap());
    let g_logits = ops::row_softmax_backward(&p, &w).unwrap();
    let (chained, _) = ops::matmul_backward(&x, &b, &g_logits).unwrap();

    let mut hand = Matrix::zeros(5, 4);
    for i in 0..5 {
        let inner: f64 = (0..3).map(|k| w[(i, k)] * p[(i, k)]).sum();
        for j in 0..4 {
            hand[(i, j)] = (0..3).map(|k| p[(i, k)] * (w[(i, k)] - inner) * b[(j, k)]).sum();
        }
    }
    chained.max_abs_diff(&hand)
}

fn probe_from(ps: &[Param], act: OutputActivation, freeze: bool) -> ProbeParams {
    let mut p = ProbeParams::from_weights(ps[0].value.clone(), ps[1].value.clone(), ps[2].value.clone(), ps[3].value.clone());
    p.output_activation = act;
    p.freeze_w2b2 = freeze;
    p
}

/// Full probe objective (EPN-UCE on labeled nodes plus both regularizers on
/// every node) under each output activation.
pub fn objective_suite(seed: u64) -> Vec<(String, f64)> {
    let (n, h, c) = (12, 4, 3);
    let mut r = rng(seed);
    let z = random_matrix(n, h, 1.0, &mut r);
    let probs = random_probs(n, c, &mut r);
    let targets: Vec<(usize, usize)> = (0..6).map(|i| (i, r.random_range(0..c))).collect();
    let weights = LossWeights { lambda1: 0.3, lambda2: 0.2 };
    // e_id well above the evidence reached here keeps both hinges active.
    let pcl = PclConfig { e_id: 40.0, e_ood: 0.0 };
    let mut out = Vec::new();
    for act in [OutputActivation::None, OutputActivation::Exp, OutputActivation::Softplus] {
        let mut init = ProbeParams::new(h, c, 0.3, seed);
        init.b1.value = random_matrix(1, c, 0.3, &mut r);
        init.w2.value = Matrix::from_vec(c, 1, (0..c).map(|_| r.random_range(0.5..1.5)).collect()).unwrap();
        init.b2.value = Matrix::filled(1, 1, 0.2);
        if act == OutputActivation::Exp {
            // keeps exp(e_total) in a range where the loss is well conditioned
            init.w1.value.scale(0.1);
            init.w2.value.scale(0.3);
        }
        let mut params: Vec<Param> = init.params().into_iter().cloned().collect();
        let err = check_gradients(&mut params, |ps| {
            let mut probe = probe_from(ps, act, false);
            let (o, cache) = probe.forward(&z, &probs).unwrap();
            let (terms, g_e, g_q) = epn_objective(&o, &targets, &weights, &pcl);
            probe.backward(&o, &cache, &g_e, &g_q).unwrap();
            for (dst, src) in ps.iter_mut().zip(probe.params()) {
                dst.grad = src.grad.clone();
            }
            terms.total
        });
        out.push((format!("epn_objective.{act:?}").to_lowercase(), err));
    }
    out
}

/// Backbone cross-entropy through both GCN layers with a fixed dropout mask.
pub fn backbone_check(graph: &Graph, seed: u64) -> f64 {
    let c = graph.num_classes();
    let model = GcnModel::new(graph, 6, c, 0.3, seed);
    let targets: Vec<(usize, usize)> = (0..graph.num_nodes()).map(|i| (i, i % c)).collect();
    let mut params: Vec<Param> = model.params().into_iter().cloned().collect();
    let x = graph.features().clone();
    check_gradients(&mut params, |ps| {
        let mut m = GcnModel::from_weights(
            graph,
            ps[0].value.clone(),
            ps[1].value.clone(),
            ps[2].value.clone(),
            ps[3].value.clone(),
            0.3,
        );
        let fwd = m.forward(&x, Some(&mut ChaCha8Rng::seed_from_u64(seed))).unwrap();
        let (loss, g) = cross_entropy(&fwd.logits, &targets);
        m.backward(&fwd, &g).unwrap();
        for (dst, src) in ps.iter_mut().zip(m.params()) {
            dst.grad = src.grad.clone();
        }
        loss
    })
}
