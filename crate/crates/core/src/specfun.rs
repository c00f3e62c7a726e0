//! Log-gamma, digamma and trigamma on the positive real axis.
//!
//! All three use upward recurrence into the asymptotic region followed by a
//! truncated Stirling-type series. Arguments must be positive and finite; the
//! unchecked entry points return NaN otherwise so they can sit inside loss
//! kernels, and the `try_*` variants report a domain error.

use crate::error::{Error, Result};

const SHIFT_THRESHOLD: f64 = 10.0;

/// B_{2k}/(2k) for k = 1..6.
const DIGAMMA_SERIES: [f64; 6] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
];

/// B_{2k} for k = 1..7.
const TRIGAMMA_SERIES: [f64; 7] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
];

/// B_{2k}/(2k(2k−1)) for k = 1..7.
const STIRLING_SERIES: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
];

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[inline]
fn in_domain(x: f64) -> bool {
    x > 0.0 && x.is_finite()
}

fn domain_error(name: &str, x: f64) -> Error {
    Error::Domain(format!("{name} requires a positive finite argument, got {x}"))
}

/// Digamma ψ(x) for x > 0; NaN outside the domain.
pub fn digamma(mut x: f64) -> f64 {
    if !in_domain(x) {
        return f64::NAN;
    }
    let mut shift = 0.0;
    while x < SHIFT_THRESHOLD {
        shift += 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    // Horner over the series in 1/x²
    let mut tail = 0.0;
    for &c in DIGAMMA_SERIES.iter().rev() {
        tail = tail * inv2 + c;
    }
    x.ln() - 0.5 / x - tail * inv2 - shift
}

/// Trigamma ψ⁽¹⁾(x) for x > 0; NaN outside the domain.
pub fn trigamma(mut x: f64) -> f64 {
    if !in_domain(x) {
        return f64::NAN;
    }
    let mut shift = 0.0;
    while x < SHIFT_THRESHOLD {
        shift += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut tail = 0.0;
    for &c in TRIGAMMA_SERIES.iter().rev() {
        tail = tail * inv2 + c;
    }
    // 1/x + 1/(2x²) + Σ B_{2k} / x^{2k+1}
    inv + 0.5 * inv2 + tail * inv2 * inv + shift
}

/// ln Γ(x) for x > 0; NaN outside the domain.
pub fn ln_gamma(mut x: f64) -> f64 {
    if !in_domain(x) {
        return f64::NAN;
    }
    let threshold = 2.0 * SHIFT_THRESHOLD;
    let mut prod = 1.0;
    while x < threshold {
        prod *= x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut tail = 0.0;
    for &c in STIRLING_SERIES.iter().rev() {
        tail = tail * inv2 + c;
    }
    (x - 0.5) * x.ln() - x + HALF_LN_2PI + tail * inv - prod.ln()
}

pub fn try_digamma(x: f64) -> Result<f64> {
    if in_domain(x) { Ok(digamma(x)) } else { Err(domain_error("digamma", x)) }
}

pub fn try_trigamma(x: f64) -> Result<f64> {
    if in_domain(x) { Ok(trigamma(x)) } else { Err(domain_error("trigamma", x)) }
}

pub fn try_ln_gamma(x: f64) -> Result<f64> {
    if in_domain(x) { Ok(ln_gamma(x)) } else { Err(domain_error("ln_gamma", x)) }
}
