//! Robustness of graph-feature inference under node-exchangeable models.
//!
//! Models are step graphons. A [`Neighborhood`] is the Kullback–Leibler ball
//! around an assumed model; [`anneal`] searches it for the model with the
//! largest expected loss of a feature estimator, and
//! [`min_nonrobust_radius`] finds the smallest ball in which that worst case
//! crosses a score threshold.

// Negated comparisons below are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod annealing;
pub mod divergence;
pub mod error;
pub mod graphon;
pub mod loss;
pub mod neighborhood;
pub mod radius;
pub mod seed;

pub use annealing::{
    anneal, anneal_restarts, brute_force_max, brute_force_scan, calibrate_t0, AnnealingConfig, AnnealingTrace,
    BruteForceConfig, BruteForceResult, Cooling, InitialTemperature, TraceRecord,
};
pub use divergence::{kl_exact, kl_monte_carlo, DirichletSpec, KlEstimate};
pub use error::{Error, InvalidReason, Result};
pub use graphon::{AdjacencyMatrix, GraphFeature, LatentPositions, StepGraphon};
pub use loss::{expected_loss, expected_loss_exact, normalized_score, LossEstimate, LossEvaluator, Regime, SampleBudget};
pub use neighborhood::{KlPolicy, Membership, ModelState, MoveKind, MoveMix, Neighborhood, Proposal};
pub use radius::{min_nonrobust_radius, Decision, RadiusSearchConfig, RadiusSearchResult, RobustnessDiagnostic};
