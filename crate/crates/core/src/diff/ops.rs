//! Forward and backward kernels. Each `*_backward` takes the upstream gradient
//! of the op's output and returns the gradient of its input(s).

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, Matrix};

fn same_shape(a: &Matrix, b: &Matrix, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!("{what}: {:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    a.matmul(b)
}

/// Gradients of `a · b` with respect to `a` and `b`.
pub fn matmul_backward(a: &Matrix, b: &Matrix, grad: &Matrix) -> Result<(Matrix, Matrix)> {
    Ok((grad.matmul_t(b)?, a.t_matmul(grad)?))
}

pub fn spmm(s: &CsrMatrix, x: &Matrix) -> Result<Matrix> {
    s.mul_dense(x)
}

/// Gradient of `s · x` with respect to the dense operand.
pub fn spmm_backward(s: &CsrMatrix, grad: &Matrix) -> Result<Matrix> {
    s.t_mul_dense(grad)
}

/// Adds the `1 × cols` row `bias` to every row of `x`.
pub fn add_row_bias(x: &Matrix, bias: &Matrix) -> Result<Matrix> {
    if bias.rows() != 1 || bias.cols() != x.cols() {
        return Err(Error::Shape(format!("bias {:?} for input {:?}", bias.shape(), x.shape())));
    }
    let mut out = x.clone();
    for i in 0..out.rows() {
        for (o, b) in out.row_mut(i).iter_mut().zip(bias.as_slice()) {
            *o += b;
        }
    }
    Ok(out)
}

/// Returns `(grad_x, grad_bias)`.
pub fn add_row_bias_backward(grad: &Matrix) -> (Matrix, Matrix) {
    (grad.clone(), grad.col_sums())
}

pub fn relu(x: &Matrix) -> Matrix {
    x.map(|v| v.max(0.0))
}

/// The subgradient at 0 is taken as 0.
pub fn relu_backward(x: &Matrix, grad: &Matrix) -> Result<Matrix> {
    same_shape(x, grad, "relu backward")?;
    x.zip_map(grad, |v, g| if v > 0.0 { g } else { 0.0 })
}

pub fn exp(x: &Matrix) -> Matrix {
    x.map(f64::exp)
}

/// Uses the stored forward output `out = exp(x)`.
pub fn exp_backward(out: &Matrix, grad: &Matrix) -> Result<Matrix> {
    same_shape(out, grad, "exp backward")?;
    out.zip_map(grad, |o, g| o * g)
}

pub fn softplus_scalar(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softplus(x: &Matrix) -> Matrix {
    x.map(softplus_scalar)
}

pub fn softplus_backward(x: &Matrix, grad: &Matrix) -> Result<Matrix> {
    same_shape(x, grad, "softplus backward")?;
    x.zip_map(grad, |v, g| sigmoid(v) * g)
}

/// Inverted dropout. Returns the output and, in training mode, the mask of
/// per-entry multipliers (0 or `1/(1−p)`) needed by the backward pass.
pub fn dropout<R: Rng + ?Sized>(x: &Matrix, p: f64, train: bool, rng: &mut R) -> (Matrix, Option<Matrix>) {
    if !train || p <= 0.0 {
        return (x.clone(), None);
    }
    let keep = 1.0 - p;
    let mut mask = Matrix::zeros(x.rows(), x.cols());
    for m in mask.as_mut_slice() {
        // p = 1 drops everything
        *m = if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 };
    }
    let out = x.zip_map(&mask, |v, m| v * m).expect("mask has the input shape");
    (out, Some(mask))
}

pub fn dropout_backward(mask: Option<&Matrix>, grad: &Matrix) -> Result<Matrix> {
    match mask {
        None => Ok(grad.clone()),
        Some(m) => {
            same_shape(m, grad, "dropout backward")?;
            m.zip_map(grad, |m, g| m * g)
        }
    }
}

pub fn logsumexp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn row_softmax(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Uses the stored forward output `p = softmax(x)`.
pub fn row_softmax_backward(p: &Matrix, grad: &Matrix) -> Result<Matrix> {
    same_shape(p, grad, "softmax backward")?;
    let mut out = Matrix::zeros(p.rows(), p.cols());
    for i in 0..p.rows() {
        let (pi, gi) = (p.row(i), grad.row(i));
        let inner: f64 = pi.iter().zip(gi).map(|(a, b)| a * b).sum();
        for ((o, &pv), &g) in out.row_mut(i).iter_mut().zip(pi).zip(gi) {
            *o = pv * (g - inner);
        }
    }
    Ok(out)
}

pub fn log_row_softmax(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for i in 0..out.rows() {
        let lse = logsumexp(out.row(i));
        for v in out.row_mut(i) {
            *v -= lse;
        }
    }
    out
}

/// Uses the stored forward output `out = log_softmax(x)`.
pub fn log_row_softmax_backward(out: &Matrix, grad: &Matrix) -> Result<Matrix> {
    same_shape(out, grad, "log-softmax backward")?;
    let mut gx = Matrix::zeros(out.rows(), out.cols());
    for i in 0..out.rows() {
        let total: f64 = grad.row(i).iter().sum();
        for ((o, &l), &g) in gx.row_mut(i).iter_mut().zip(out.row(i)).zip(grad.row(i)) {
            *o = g - l.exp() * total;
        }
    }
    Ok(gx)
}
