//! Experiment driver for `netrobust`: configuration, seeded runs, persisted
//! traces and the tables derived from them.

// Negated comparisons below are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod run;
pub mod tools;

use std::path::PathBuf;

pub use config::{ExperimentConfig, Overrides};
pub use run::{run_experiment, run_radius_search};
pub use tools::{eg1_state, kl_between, sample_graphs};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(#[from] netrobust_core::Error),

    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 2 for configuration problems, 3 for numerical failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 1,
        }
    }
}
