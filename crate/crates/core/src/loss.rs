//! Expected quadratic loss of a graph-feature estimator under a model.
//!
//! For a model `W` the target is the graphon functional `τ(W)` and the
//! estimator `τ̂(G)` is computed on W-random graphs, so
//!
//! ```text
//! E[(τ̂ − τ)²] = Var(τ̂) + (E[τ̂] − τ)²
//! ```
//!
//! The Monte Carlo estimator draws `n_param_samples` latent-position vectors
//! and, for each, `n_graphs_per_param` edge resamplings. For density and
//! average degree the loss also has a closed form via the variance of the
//! edge count of a W-random graph:
//!
//! ```text
//! Var(E) = M·τ(1−τ) + N(N−1)(N−2)·(E[d(u)²] − τ²),    M = N(N−1)/2
//! ```
//!
//! where `d(u)` is the row mean of the graphon.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphon::{GraphFeature, LatentPositions, StepGraphon};
use crate::seed;

/// Monte Carlo effort for one loss evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleBudget {
    pub n_param_samples: usize,
    pub n_graphs_per_param: usize,
}

impl SampleBudget {
    /// 1000 latent-position draws × 100 networks each.
    pub const FULL: SampleBudget = SampleBudget { n_param_samples: 1000, n_graphs_per_param: 100 };
    /// Reduced budget for inner search loops.
    pub const SEARCH: SampleBudget = SampleBudget { n_param_samples: 100, n_graphs_per_param: 10 };

    pub fn total(&self) -> usize {
        self.n_param_samples * self.n_graphs_per_param
    }

    fn validate(&self) -> Result<()> {
        if self.n_param_samples == 0 || self.n_graphs_per_param == 0 {
            return Err(Error::param("budget", "sample counts must be at least 1"));
        }
        Ok(())
    }
}

/// Feature under study and the size of the observed networks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub feature: GraphFeature,
    pub n_nodes: usize,
    pub budget: SampleBudget,
}

impl Regime {
    pub fn new(feature: GraphFeature, n_nodes: usize, budget: SampleBudget) -> Result<Self> {
        feature.validate()?;
        budget.validate()?;
        if n_nodes < 2 {
            return Err(Error::param("n_nodes", "networks need at least two nodes"));
        }
        Ok(Regime { feature, n_nodes, budget })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossEstimate {
    pub expected_loss: f64,
    pub variance_term: f64,
    pub bias_sq_term: f64,
    pub n_param_samples: usize,
    pub n_graphs_per_param: usize,
    pub std_error: f64,
}

/// Monte Carlo estimate of the expected loss of `regime.feature` under `model`.
///
/// Parameter draw `k` uses the stream `derive(seed, k)`, so the result does
/// not depend on how the draws are scheduled across threads.
pub fn expected_loss(model: &StepGraphon, regime: &Regime, seed: u64) -> Result<LossEstimate> {
    expected_loss_with_budget(model, regime, regime.budget, seed)
}

pub fn expected_loss_with_budget(
    model: &StepGraphon,
    regime: &Regime,
    budget: SampleBudget,
    seed: u64,
) -> Result<LossEstimate> {
    budget.validate()?;
    let target = model.model_feature(regime.feature, regime.n_nodes)?;
    let groups: Vec<Vec<f64>> = (0..budget.n_param_samples as u64)
        .into_par_iter()
        .map(|k| estimates_for_param(model, regime, budget.n_graphs_per_param, seed::derive(seed, k)))
        .collect::<Result<_>>()?;
    Ok(summarize(&groups, target, budget))
}

fn estimates_for_param(model: &StepGraphon, regime: &Regime, n_graphs: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = seed::rng(seed);
    let latent = LatentPositions::sample(regime.n_nodes, &mut rng);
    let n = regime.n_nodes;
    let pairs = (n * (n - 1) / 2) as f64;
    match regime.feature {
        GraphFeature::Density | GraphFeature::AverageDegree => {
            let cells: Vec<usize> = latent.as_slice().iter().map(|&u| model.cell_of(u)).collect();
            Ok((0..n_graphs)
                .map(|_| {
                    let edges = model.sample_edge_count(&cells, &mut rng) as f64;
                    if regime.feature == GraphFeature::Density {
                        edges / pairs
                    } else {
                        2.0 * edges / n as f64
                    }
                })
                .collect())
        }
        GraphFeature::BlockCount { .. } => (0..n_graphs)
            .map(|_| {
                model
                    .sample_edges(&latent, &mut rng)
                    .graph_feature(regime.feature, model.resolution())
            })
            .collect(),
    }
}

/// Loss decomposition over all estimates; the standard error treats each
/// parameter draw's mean squared error as one independent observation.
fn summarize(groups: &[Vec<f64>], target: f64, budget: SampleBudget) -> LossEstimate {
    let count = budget.total() as f64;
    let mean = groups.iter().flatten().sum::<f64>() / count;
    let variance = groups.iter().flatten().map(|t| (t - mean).powi(2)).sum::<f64>() / count;
    let bias_sq = (mean - target).powi(2);

    let group_mse: Vec<f64> = groups
        .iter()
        .map(|g| g.iter().map(|t| (t - target).powi(2)).sum::<f64>() / g.len() as f64)
        .collect();
    let std_error = if group_mse.len() > 1 {
        let (_, sd) = crate::divergence::mean_and_sd(&group_mse);
        sd / (group_mse.len() as f64).sqrt()
    } else {
        let all: Vec<f64> = groups[0].iter().map(|t| (t - target).powi(2)).collect();
        let (_, sd) = crate::divergence::mean_and_sd(&all);
        sd / (all.len() as f64).sqrt()
    };

    LossEstimate {
        expected_loss: variance + bias_sq,
        variance_term: variance,
        bias_sq_term: bias_sq,
        n_param_samples: budget.n_param_samples,
        n_graphs_per_param: budget.n_graphs_per_param,
        std_error,
    }
}

/// Closed-form expected loss for density and average degree. Both
/// estimators are unbiased, so the loss is their variance.
pub fn expected_loss_exact(model: &StepGraphon, regime: &Regime) -> Result<LossEstimate> {
    let n = regime.n_nodes as f64;
    let pairs = n * (n - 1.0) / 2.0;
    let tau = model.density();
    let row_sq = model.row_means().iter().map(|d| d * d).sum::<f64>() / model.resolution() as f64;
    let degree_var = (row_sq - tau * tau).max(0.0);
    let edge_var = pairs * tau * (1.0 - tau) + n * (n - 1.0) * (n - 2.0) * degree_var;
    let variance = match regime.feature {
        GraphFeature::Density => edge_var / (pairs * pairs),
        GraphFeature::AverageDegree => 4.0 * edge_var / (n * n),
        GraphFeature::BlockCount { .. } => {
            return Err(Error::UnsupportedFeature {
                feature: "blocks",
                reason: "no closed-form loss; use the Monte Carlo evaluator",
            })
        }
    };
    Ok(LossEstimate {
        expected_loss: variance,
        variance_term: variance,
        bias_sq_term: 0.0,
        n_param_samples: 0,
        n_graphs_per_param: 0,
        std_error: 0.0,
    })
}

/// How an objective value is obtained for a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossEvaluator {
    MonteCarlo { budget: SampleBudget },
    Exact,
}

impl LossEvaluator {
    pub fn evaluate(&self, model: &StepGraphon, regime: &Regime, seed: u64) -> Result<LossEstimate> {
        match *self {
            LossEvaluator::MonteCarlo { budget } => expected_loss_with_budget(model, regime, budget, seed),
            LossEvaluator::Exact => expected_loss_exact(model, regime),
        }
    }

    /// Whether two calls with different seeds can disagree.
    pub fn is_stochastic(&self) -> bool {
        matches!(self, LossEvaluator::MonteCarlo { .. })
    }
}

/// `(loss(model) − loss(center)) / loss(center)`.
pub fn normalized_score(model: &LossEstimate, center: &LossEstimate) -> Result<f64> {
    normalized_score_value(model.expected_loss, center.expected_loss)
}

pub fn normalized_score_value(model_loss: f64, center_loss: f64) -> Result<f64> {
    if !(center_loss > 0.0) {
        return Err(Error::CenterLossZero);
    }
    Ok((model_loss - center_loss) / center_loss)
}
