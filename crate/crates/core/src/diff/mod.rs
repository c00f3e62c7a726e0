//! Hand-assembled reverse-mode core: op kernels with analytic backward passes,
//! Adam, early stopping, finite-difference checking and JSON checkpoints.

mod checkpoint;
pub mod ops;
mod optim;

pub use checkpoint::{checkpoint_from_json, checkpoint_to_json, load_checkpoint, save_checkpoint, Checkpoint};
pub use optim::{Adam, AdamConfig, EarlyStopper};
pub(crate) use checkpoint::take as checkpoint_take;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::Matrix;

/// A named trainable tensor with its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Matrix) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        Self { name: name.into(), value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    /// Adds `g` into the gradient buffer.
    pub fn accumulate(&mut self, g: &Matrix) {
        self.grad.add_assign(g).expect("gradient shape must match the parameter");
    }
}

/// Relative error used by the gradient checker. The floor keeps coordinates
/// with near-zero gradient from dominating through finite-difference noise.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

/// Compares analytic gradients against central differences.
///
/// `loss` must zero and refill every `grad` buffer and return the scalar
/// loss. It is called once at the unperturbed point for the analytic
/// gradient and twice per checked coordinate. At most `max_coords`
/// coordinates, drawn uniformly with `seed`, are checked. Returns the largest
/// relative error seen.
pub fn check_gradients_with<F>(params: &mut [Param], mut loss: F, h: f64, max_coords: usize, seed: u64) -> f64
where
    F: FnMut(&mut [Param]) -> f64,
{
    loss(params);
    let analytic: Vec<Matrix> = params.iter().map(|p| p.grad.clone()).collect();
    let coords: Vec<(usize, usize)> =
        params.iter().enumerate().flat_map(|(i, p)| (0..p.value.len()).map(move |k| (i, k))).collect();
    let picked: Vec<usize> = if coords.len() <= max_coords {
        (0..coords.len()).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        index::sample(&mut rng, coords.len(), max_coords).into_vec()
    };
    let mut worst: f64 = 0.0;
    for c in picked {
        let (i, k) = coords[c];
        let orig = params[i].value.as_slice()[k];
        params[i].value.as_mut_slice()[k] = orig + h;
        let up = loss(params);
        params[i].value.as_mut_slice()[k] = orig - h;
        let down = loss(params);
        params[i].value.as_mut_slice()[k] = orig;
        let numeric = (up - down) / (2.0 * h);
        worst = worst.max(relative_error(analytic[i].as_slice()[k], numeric));
    }
    loss(params);
    worst
}

/// [`check_gradients_with`] at `h = 1e-5` over at most 200 coordinates.
pub fn check_gradients<F>(params: &mut [Param], loss: F) -> f64
where
    F: FnMut(&mut [Param]) -> f64,
{
    check_gradients_with(params, loss, 1e-5, 200, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient_is_exact() {
        let mut ps = vec![Param::new("theta", Matrix::from_rows(&[vec![0.3, -1.2, 2.5]]).unwrap())];
        let err = check_gradients(&mut ps, |ps| {
            let p = &mut ps[0];
            p.grad = p.value.map(|v| 2.0 * v);
            p.value.frobenius_sq()
        });
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn wrong_gradient_is_detected() {
        let mut ps = vec![Param::new("theta", Matrix::row_vector(vec![1.0, 2.0]))];
        let err = check_gradients(&mut ps, |ps| {
            let p = &mut ps[0];
            p.grad = p.value.clone();
            p.value.frobenius_sq()
        });
        assert!(err > 0.4);
    }
}
