//! Kullback–Leibler divergence between step-graphon models.
//!
//! The divergence of `W` from the center `W*` is the Bernoulli KL of the
//! edge indicator averaged over the unit square:
//!
//! ```text
//! KL(W*, W) = (1/n²) Σ_ij  p log(p/q) + (1−p) log((1−p)/(1−q)),   p = W*_ij, q = W_ij
//! ```
//!
//! It is computed exactly cell by cell, or estimated from random point
//! patterns of latent positions (one unordered pair per sampled node pair).

mod bootstrap;
mod filter;
mod special;

pub use bootstrap::{bootstrap_kl_mean, bootstrap_kl_variance, categorical_kl, DirichletSpec};
pub(crate) use bootstrap::normalized_gammas;
pub use filter::{majorization_filter, FilterDecision};
pub use special::{digamma, trigamma};

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graphon::{check_same_resolution, StepGraphon};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum KlMethod {
    Exact,
    MonteCarlo,
    ClosedFormMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KlEstimate {
    /// Divergence in nats.
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub method: KlMethod,
    /// False when the standard error could not be estimated (single replicate).
    pub std_error_defined: bool,
}

impl KlEstimate {
    fn exact(value: f64) -> Self {
        KlEstimate {
            value,
            std_error: 0.0,
            n_samples: 0,
            method: KlMethod::Exact,
            std_error_defined: true,
        }
    }
}

/// Bernoulli KL with `0·log(0/x) = 0`. Returns `None` when `p` is not
/// absolutely continuous with respect to `q`.
#[inline]
pub fn bernoulli_kl(p: f64, q: f64) -> Option<f64> {
    let on = if p > 0.0 {
        if q <= 0.0 {
            return None;
        }
        p * (p / q).ln()
    } else {
        0.0
    };
    let off = if p < 1.0 {
        if q >= 1.0 {
            return None;
        }
        (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln()
    } else {
        0.0
    };
    // rounding can push a zero divergence a hair below zero
    Some((on + off).max(0.0))
}

/// Per-cell divergence table, failing on the first absolute-continuity violation.
fn cell_divergences(center: &StepGraphon, model: &StepGraphon) -> Result<Vec<f64>> {
    check_same_resolution(center, model)?;
    let n = center.resolution();
    center
        .heights()
        .iter()
        .zip(model.heights())
        .enumerate()
        .map(|(idx, (&p, &q))| {
            bernoulli_kl(p, q).ok_or(Error::AbsoluteContinuityViolation {
                row: idx / n,
                col: idx % n,
                p,
                q,
            })
        })
        .collect()
}

/// Exact cellwise divergence of `model` from `center`.
pub fn kl_exact(center: &StepGraphon, model: &StepGraphon) -> Result<KlEstimate> {
    let cells = cell_divergences(center, model)?;
    let value = cells.iter().sum::<f64>() / cells.len() as f64;
    Ok(KlEstimate::exact(value))
}

/// Point-pattern Monte Carlo estimate. Each replicate draws `n_points`
/// uniform latent positions, reflects every pair into the upper triangle and
/// averages the cell divergence over all `n_points·(n_points−1)/2` pairs.
pub fn kl_monte_carlo(
    center: &StepGraphon,
    model: &StepGraphon,
    n_points: usize,
    n_reps: usize,
    seed: u64,
) -> Result<KlEstimate> {
    if n_points < 2 {
        return Err(Error::param("n_points", "need at least two points per pattern"));
    }
    if n_reps == 0 {
        return Err(Error::param("n_reps", "need at least one replicate"));
    }
    let table = cell_divergences(center, model)?;
    let n = center.resolution();
    let pairs = (n_points * (n_points - 1) / 2) as f64;
    let mut rng = seed::rng(seed);
    let mut cells = vec![0usize; n_points];
    let reps: Vec<f64> = (0..n_reps)
        .map(|_| {
            for c in cells.iter_mut() {
                *c = center.cell_of(rng.random::<f64>());
            }
            let mut total = 0.0;
            for (a, &ca) in cells.iter().enumerate() {
                for &cb in &cells[a + 1..] {
                    let (lo, hi) = if ca <= cb { (ca, cb) } else { (cb, ca) };
                    total += table[lo * n + hi];
                }
            }
            total / pairs
        })
        .collect();
    let (mean, sd) = mean_and_sd(&reps);
    Ok(KlEstimate {
        value: mean,
        std_error: if n_reps > 1 { sd / (n_reps as f64).sqrt() } else { 0.0 },
        n_samples: n_reps,
        method: KlMethod::MonteCarlo,
        std_error_defined: n_reps > 1,
    })
}

/// ε-contamination `(1−ε)·W* + ε·q`, cellwise.
pub fn contaminate(center: &StepGraphon, contaminant: &StepGraphon, eps: f64) -> Result<StepGraphon> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::param("eps", format!("{eps} is outside [0, 1]")));
    }
    check_same_resolution(center, contaminant)?;
    let heights = center
        .heights()
        .iter()
        .zip(contaminant.heights())
        .map(|(&w, &q)| ((1.0 - eps) * w + eps * q).clamp(0.0, 1.0))
        .collect();
    StepGraphon::new(center.resolution(), heights)
}

/// Mean and sample standard deviation (`n − 1` denominator; 0 for one value).
pub(crate) fn mean_and_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}
