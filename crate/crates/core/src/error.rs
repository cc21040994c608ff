use thiserror::Error;

use crate::expr::ExprError;

/// Errors raised by the geometric layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("degenerate metric: |det| = {det:e} below threshold {threshold:e}")]
    DegenerateMetric { det: f64, threshold: f64 },
    #[error("rank deficient: {what} has rank {rank}, expected {expected}")]
    RankDeficient { what: String, rank: usize, expected: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-positive warping function: f = {value} at {at}")]
    NonPositiveWarp { value: f64, at: String },
    #[error("warping data required by `{check}` is missing")]
    MissingWarpData { check: String },
    #[error("no admissible points")]
    NoAdmissiblePoints,
    #[error("invalid {what}: {reason}")]
    Invalid { what: String, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
