use std::io;

use thiserror::Error;

/// Errors raised anywhere in the integration and estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid precision: {0}")]
    Precision(String),

    #[error("precision mismatch: expected {expected} bits, found {found} bits")]
    PrecisionMismatch { expected: u32, found: u32 },

    #[error("cannot parse scalar from {input:?}")]
    Parse { input: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("singular linear system{}", .interval.map(|m| format!(" on interval {m}")).unwrap_or_default())]
    Singular { interval: Option<usize> },

    #[error("invalid partition: {0}")]
    Partition(String),

    #[error("invalid basis: {0}")]
    Basis(String),

    #[error("time {t} outside [{start}, {end}]")]
    OutOfDomain { t: String, start: String, end: String },

    #[error("invalid problem: {0}")]
    Problem(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(
        "nonlinear iteration did not converge on interval {interval} after {iterations} iterations \
         (last update {last_update}); try a smaller time step"
    )]
    NonConvergence {
        interval: usize,
        iterations: usize,
        last_update: String,
    },

    #[error("dual degree {dual_degree} cannot resolve derivative of order {order}")]
    DegenerateDual { dual_degree: usize, order: usize },

    #[error("horizon mismatch: {0}")]
    Horizon(String),

    #[error("trajectory file: {0}")]
    Format(String),

    #[error("stale input: {0}")]
    Stale(String),

    #[error("refusing long-running job (estimated {estimate:.3e} s > {threshold:.3e} s); pass --confirm-long")]
    LongRunning { estimate: f64, threshold: f64 },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
