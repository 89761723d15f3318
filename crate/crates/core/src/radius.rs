//! Smallest ball radius at which the assumed model is flagged non-robust.
//!
//! Phase 1 brackets the threshold by doubling the radius while the
//! diagnostic says robust (halving while it says not robust). Phase 2
//! bisects the bracket `(robust C_lo, non-robust C_hi)` until the diagnostic
//! budget is spent or `C_hi − C_lo < 1e-3 · C_hi`, and returns `C_hi`.

use serde::{Deserialize, Serialize};

use crate::annealing::{anneal, AnnealingConfig};
use crate::error::{Error, Result};
use crate::graphon::StepGraphon;
use crate::loss::{normalized_score_value, Regime};
use crate::neighborhood::{KlPolicy, Neighborhood};
use crate::seed;

/// Maximum number of doublings before giving up on a bracket.
pub const MAX_DOUBLINGS: usize = 60;

/// Relative bracket width at which bisection stops.
pub const RELATIVE_WIDTH: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum Decision {
    Robust { score: f64 },
    NotRobust { score: f64 },
}

impl Decision {
    /// Strict comparison: a score equal to the threshold is robust.
    pub fn from_score(score: f64, theta: f64) -> Self {
        if score > theta {
            Decision::NotRobust { score }
        } else {
            Decision::Robust { score }
        }
    }

    pub fn is_robust(&self) -> bool {
        matches!(self, Decision::Robust { .. })
    }

    pub fn score(&self) -> f64 {
        match *self {
            Decision::Robust { score } | Decision::NotRobust { score } => score,
        }
    }

    pub fn label(&self) -> &'static str {
        if self.is_robust() {
            "robust"
        } else {
            "not_robust"
        }
    }
}

/// Robustness verdict for a ball of a given radius.
pub trait RobustnessDiagnostic {
    fn diagnose(&self, radius: f64, seed: u64) -> Result<Decision>;
}

/// Runs one annealing chain in the ball and thresholds the normalized score
/// of the best model found.
pub fn diagnose(nbhd: &Neighborhood, regime: &Regime, cfg: &AnnealingConfig, theta_score: f64, seed: u64) -> Result<Decision> {
    let trace = anneal(nbhd, regime, cfg, seed)?;
    // the center's objective on the chain's first evaluation seed
    let center_loss = trace.records[0].objective;
    let score = normalized_score_value(trace.best_objective, center_loss)?;
    Ok(Decision::from_score(score, theta_score))
}

/// Worst-case score from simulated annealing.
#[derive(Debug, Clone)]
pub struct AnnealingDiagnostic {
    pub center: StepGraphon,
    pub policy: KlPolicy,
    pub regime: Regime,
    pub annealing: AnnealingConfig,
    pub theta_score: f64,
}

impl RobustnessDiagnostic for AnnealingDiagnostic {
    fn diagnose(&self, radius: f64, seed: u64) -> Result<Decision> {
        let nbhd = Neighborhood::new(self.center.clone(), radius, self.policy)?;
        diagnose(&nbhd, &self.regime, &self.annealing, self.theta_score, seed)
    }
}

/// Deterministic diagnostic `score = f(C)`, not robust iff `f(C) > θ`.
pub struct ScoreFunction<F> {
    pub score: F,
    pub theta_score: f64,
}

impl<F: Fn(f64) -> f64> RobustnessDiagnostic for ScoreFunction<F> {
    fn diagnose(&self, radius: f64, _seed: u64) -> Result<Decision> {
        Ok(Decision::from_score((self.score)(radius), self.theta_score))
    }
}

/// Stub that flips exactly at `threshold`: its score is the radius itself.
pub fn threshold_stub(threshold: f64) -> ScoreFunction<fn(f64) -> f64> {
    ScoreFunction { score: |c| c, theta_score: threshold }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusSearchConfig {
    pub c_init: f64,
    /// Total number of diagnostic calls allowed.
    pub k_iters: usize,
}

impl Default for RadiusSearchConfig {
    fn default() -> Self {
        RadiusSearchConfig { c_init: 1.0, k_iters: 100 }
    }
}

impl RadiusSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_init > 0.0 && self.c_init.is_finite()) {
            return Err(Error::param("c_init", format!("{} must be positive", self.c_init)));
        }
        if self.k_iters == 0 {
            return Err(Error::param("k_iters", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Probe {
    pub radius: f64,
    #[serde(flatten)]
    pub decision: Decision,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadiusSearchResult {
    /// Smallest radius found not robust.
    pub radius: f64,
    /// Largest radius found robust, if any.
    pub robust_below: Option<f64>,
    pub probes: Vec<Probe>,
}

impl RadiusSearchResult {
    /// One line per probe: `radius,decision,score`.
    pub fn log_lines(&self) -> Vec<String> {
        self.probes
            .iter()
            .map(|p| format!("{},{},{}", p.radius, p.decision.label(), p.decision.score()))
            .collect()
    }
}

/// Bracketing plus bisection on the radius. Probe at radius `C` uses the
/// seed `derive(seed, C.to_bits())`, so the search is deterministic and a
/// radius probed twice gets the same verdict.
pub fn min_nonrobust_radius<D: RobustnessDiagnostic + ?Sized>(
    diagnostic: &D,
    cfg: &RadiusSearchConfig,
    seed: u64,
) -> Result<RadiusSearchResult> {
    cfg.validate()?;
    let mut probes = Vec::new();
    let probe = |radius: f64, probes: &mut Vec<Probe>| -> Result<bool> {
        let decision = diagnostic.diagnose(radius, seed::derive(seed, radius.to_bits()))?;
        probes.push(Probe { radius, decision });
        Ok(decision.is_robust())
    };

    let mut c = cfg.c_init;
    let (mut lo, mut hi) = if probe(c, &mut probes)? {
        let mut doublings = 0;
        loop {
            let lo = c;
            if doublings == MAX_DOUBLINGS || probes.len() >= cfg.k_iters {
                return Err(Error::NoBracket { last_radius: c });
            }
            c *= 2.0;
            doublings += 1;
            if !probe(c, &mut probes)? {
                break (lo, c);
            }
        }
    } else {
        loop {
            let hi = c;
            if probes.len() >= cfg.k_iters {
                return Ok(RadiusSearchResult { radius: hi, robust_below: None, probes });
            }
            c *= 0.5;
            if probe(c, &mut probes)? {
                break (c, hi);
            }
        }
    };

    while probes.len() < cfg.k_iters && hi - lo >= RELATIVE_WIDTH * hi {
        let mid = 0.5 * (lo + hi);
        if probe(mid, &mut probes)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(RadiusSearchResult { radius: hi, robust_below: Some(lo), probes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_stub_threshold() {
        let res = min_nonrobust_radius(&threshold_stub(1.5), &RadiusSearchConfig::default(), 1).unwrap();
        assert!(res.radius > 1.5);
        assert!((res.radius - 1.5) / 1.5 <= RELATIVE_WIDTH, "{}", res.radius);
        let lo = res.robust_below.unwrap();
        assert!(lo <= 1.5 && res.radius - lo < RELATIVE_WIDTH * res.radius);
    }

    #[test]
    fn always_not_robust_shrinks_geometrically() {
        let always = ScoreFunction { score: |_| 10.0, theta_score: 1.0 };
        let cfg = RadiusSearchConfig { c_init: 1.0, k_iters: 20 };
        let res = min_nonrobust_radius(&always, &cfg, 0).unwrap();
        assert_eq!(res.probes.len(), 20);
        assert_eq!(res.radius, 0.5f64.powi(19));
        assert!(res.robust_below.is_none());
    }

    #[test]
    fn saturated_diagnostic_has_no_bracket() {
        let never = ScoreFunction { score: |_| 0.0, theta_score: 1.0 };
        let err = min_nonrobust_radius(&never, &RadiusSearchConfig::default(), 0).unwrap_err();
        assert!(matches!(err, Error::NoBracket { .. }));
    }

    #[test]
    fn boundary_score_is_robust() {
        assert!(Decision::from_score(1.0, 1.0).is_robust());
        assert!(!Decision::from_score(1.0 + 1e-12, 1.0).is_robust());
    }

    #[test]
    fn radius_is_non_increasing_in_threshold() {
        // score grows with the radius, so a larger threshold needs a larger ball
        let radius = |theta: f64| {
            let d = ScoreFunction { score: |c: f64| c.sqrt(), theta_score: theta };
            min_nonrobust_radius(&d, &RadiusSearchConfig::default(), 0).unwrap().radius
        };
        let rs: Vec<f64> = [0.5, 1.0, 1.5, 3.0].iter().map(|&t| radius(t)).collect();
        assert!(rs.windows(2).all(|w| w[0] <= w[1]), "{rs:?}");
    }

    #[test]
    fn bracket_invariant_holds_on_every_probe() {
        let res = min_nonrobust_radius(&threshold_stub(0.37), &RadiusSearchConfig { c_init: 5.0, k_iters: 100 }, 0).unwrap();
        for p in &res.probes {
            assert_eq!(p.decision.is_robust(), p.radius <= 0.37);
        }
        assert_eq!(res.log_lines().len(), res.probes.len());
    }

    #[test]
    fn config_validation() {
        assert!(RadiusSearchConfig { c_init: 0.0, k_iters: 10 }.validate().is_err());
        assert!(RadiusSearchConfig { c_init: 1.0, k_iters: 0 }.validate().is_err());
    }
}
