//! Closed-form moments of the divergence of a generalized Bayesian bootstrap
//! draw `w ~ Dirichlet(α·p)` from its base weights `p`:
//!
//! ```text
//! KL(w ‖ p) = Σ w_i log w_i − Σ w_i log p_i
//! ```
//!
//! Each marginal is `w_i ~ Beta(α p_i, α(1 − p_i))`, which gives
//! `E[w_i log w_i] = p_i {ψ₀(α p_i + 1) − ψ₀(α + 1)}`; the variance is
//! assembled from the second moments of `w_i` and `w_i log w_i`.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use super::special::{digamma_unchecked as psi0, trigamma_unchecked as psi1};
use crate::error::{Error, Result};

/// Tolerance on `Σ p_i = 1`.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Concentration and base weights of a Dirichlet reweighing.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletSpec {
    alpha_n: f64,
    p: Vec<f64>,
}

impl DirichletSpec {
    pub fn new(alpha_n: f64, p: Vec<f64>) -> Result<Self> {
        if !(alpha_n > 0.0 && alpha_n.is_finite()) {
            return Err(Error::param("alpha_n", format!("{alpha_n} must be positive")));
        }
        if p.is_empty() {
            return Err(Error::param("p", "empty weight vector"));
        }
        if let Some(bad) = p.iter().find(|&&x| !(x > 0.0)) {
            return Err(Error::param("p", format!("weight {bad} must be strictly positive")));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::param("p", format!("weights sum to {total}, not 1")));
        }
        Ok(DirichletSpec { alpha_n, p })
    }

    /// Normalizes arbitrary positive weights onto the simplex.
    pub fn normalized(alpha_n: f64, weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::DegenerateState);
        }
        Self::new(alpha_n, weights.iter().map(|w| w / total).collect())
    }

    pub fn alpha_n(&self) -> f64 {
        self.alpha_n
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    /// One draw from `Dirichlet(α·p)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let shapes: Vec<f64> = self.p.iter().map(|&p| self.alpha_n * p).collect();
        normalized_gammas(&shapes, rng)
    }
}

/// Independent `Gamma(shape_k, 1)` draws divided by their sum, which is a
/// `Dirichlet(shape)` draw. Fails with [`Error::DegenerateState`] if every
/// draw underflows to zero.
pub(crate) fn normalized_gammas<R: Rng + ?Sized>(shapes: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    let mut ys = shapes
        .iter()
        .map(|&shape| {
            Gamma::new(shape, 1.0)
                .map(|g| g.sample(rng))
                .map_err(|e| Error::param("shape", format!("gamma shape {shape}: {e}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let total: f64 = ys.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateState);
    }
    ys.iter_mut().for_each(|y| *y /= total);
    Ok(ys)
}

/// Categorical divergence `Σ w_i log(w_i / p_i)` with `0·log 0 = 0`.
pub fn categorical_kl(w: &[f64], p: &[f64]) -> f64 {
    w.iter()
        .zip(p)
        .filter(|(&wi, _)| wi > 0.0)
        .map(|(&wi, &pi)| wi * (wi / pi).ln())
        .sum()
}

/// Expected divergence of a bootstrap draw from its base weights.
pub fn bootstrap_kl_mean(spec: &DirichletSpec) -> f64 {
    let a = spec.alpha_n;
    let psi_total = psi0(a + 1.0);
    spec.p
        .iter()
        .map(|&p| p * (psi0(a * p + 1.0) - psi_total) - p * p.ln())
        .sum()
}

/// Variance of the divergence of a bootstrap draw from its base weights.
pub fn bootstrap_kl_variance(spec: &DirichletSpec) -> f64 {
    let a = spec.alpha_n;
    let p = &spec.p;
    let log_p: Vec<f64> = p.iter().map(|x| x.ln()).collect();

    let psi_a1 = psi0(a + 1.0);
    let psi_a2 = psi0(a + 2.0);
    let tri_a2 = psi1(a + 2.0);
    // ψ₀(α p_i + 1), shared by every cross term
    let psi_p1: Vec<f64> = p.iter().map(|&x| psi0(a * x + 1.0)).collect();

    let mut var = 0.0;
    for i in 0..p.len() {
        let pi = p[i];
        let first = pi * (psi_p1[i] - psi_a1);
        let d2 = psi0(a * pi + 2.0) - psi_a2;
        let head = pi * (a * pi + 1.0) / (a + 1.0);

        let var_wlogw = head * (psi1(a * pi + 2.0) - tri_a2 + d2 * d2) - first * first;
        let var_w = pi * (1.0 - pi) / (a + 1.0);
        let cov_wlogw_w = head * d2 - pi * first;
        var += var_wlogw + log_p[i] * log_p[i] * var_w - 2.0 * log_p[i] * cov_wlogw_w;

        // ordered pairs i ≠ j
        for j in 0..p.len() {
            if j == i {
                continue;
            }
            let pj = p[j];
            let cov_w = -pi * pj / (a + 1.0);
            let cov_wlogw_wj = pi * pj * (-psi_p1[i] / (a + 1.0) + psi_a1 - a * psi_a2 / (a + 1.0));
            let cov_wlogw_wlogw = a * pi * pj / (a + 1.0)
                * ((psi_p1[i] - psi_a2) * (psi_p1[j] - psi_a2) - tri_a2)
                - pi * pj * (psi_p1[i] - psi_a1) * (psi_p1[j] - psi_a1);
            var += cov_wlogw_wlogw + log_p[i] * log_p[j] * cov_w - 2.0 * log_p[j] * cov_wlogw_wj;
        }
    }
    var.max(0.0)
}
