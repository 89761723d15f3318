use thiserror::Error;

/// Reasons a proposed model is rejected before any divergence is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvalidReason {
    /// Some cell height left `[0, 1]`.
    HeightExceedsOne,
    /// The simplex mass grew beyond the center's total mass.
    MassExceedsOne,
}

impl std::fmt::Display for InvalidReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InvalidReason::HeightExceedsOne => write!(f, "height exceeds one"),
            InvalidReason::MassExceedsOne => write!(f, "mass exceeds one"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("matrix is not symmetric at ({row}, {col}): {a} vs {b}")]
    Asymmetric { row: usize, col: usize, a: f64, b: f64 },

    #[error("height {value} at ({row}, {col}) is outside [0, 1]")]
    HeightOutOfRange { row: usize, col: usize, value: f64 },

    #[error("resolution mismatch: {left} vs {right}")]
    ResolutionMismatch { left: usize, right: usize },

    #[error("absolute continuity violated at cell ({row}, {col}): p = {p}, q = {q}")]
    AbsoluteContinuityViolation { row: usize, col: usize, p: f64, q: f64 },

    #[error("invalid proposal: {0}")]
    InvalidProposal(InvalidReason),

    #[error("degenerate state: all free-cell weights are zero")]
    DegenerateState,

    #[error("center model has zero expected loss; normalized score is undefined")]
    CenterLossZero,

    #[error("calibration failed: found {found} of {wanted} inside-ball states in {proposals} proposals")]
    CalibrationFailed { found: usize, wanted: usize, proposals: usize },

    #[error("no bracket: diagnostic stayed robust up to radius {last_radius}")]
    NoBracket { last_radius: f64 },

    #[error("feature {feature} is not supported here: {reason}")]
    UnsupportedFeature { feature: &'static str, reason: &'static str },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
