//! Digamma and trigamma for positive arguments.
//!
//! Both shift the argument upward with the recurrences
//! `ψ₀(x) = ψ₀(x+1) − 1/x` and `ψ₁(x) = ψ₁(x+1) + 1/x²` until `x ≥ 10`, then
//! apply the Bernoulli-number asymptotic series in `1/x²`.

use crate::error::{Error, Result};

const SHIFT_TO: f64 = 10.0;

/// `B_{2k} / (2k)` for k = 1..8.
const DIGAMMA_SERIES: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
    -3617.0 / 8160.0,
];

/// `B_{2k}` for k = 1..8.
const TRIGAMMA_SERIES: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

fn check_domain(x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::param("x", format!("polygamma argument {x} must be positive and finite")))
    }
}

/// ψ₀(x) = d/dx ln Γ(x), for x > 0.
pub fn digamma(x: f64) -> Result<f64> {
    check_domain(x)?;
    Ok(digamma_unchecked(x))
}

/// ψ₁(x) = d²/dx² ln Γ(x), for x > 0.
pub fn trigamma(x: f64) -> Result<f64> {
    check_domain(x)?;
    Ok(trigamma_unchecked(x))
}

pub(crate) fn digamma_unchecked(mut x: f64) -> f64 {
    let mut shift = 0.0;
    while x < SHIFT_TO {
        shift += 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    // Horner in 1/x² from the highest-order term down
    let series = DIGAMMA_SERIES.iter().rev().fold(0.0, |acc, &c| (acc + c) * inv2);
    x.ln() - 0.5 / x - series - shift
}

pub(crate) fn trigamma_unchecked(mut x: f64) -> f64 {
    let mut shift = 0.0;
    while x < SHIFT_TO {
        shift += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // 1/x + 1/(2x²) + Σ B_{2k} / x^{2k+1}
    let series = TRIGAMMA_SERIES.iter().rev().fold(0.0, |acc, &c| (acc + c) * inv2);
    inv + 0.5 * inv2 + series * inv + shift
}
