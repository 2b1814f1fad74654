use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum SwarmError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("singular gravity evaluation: distance {distance:e} km to mascon {index} at t = {t} s")]
    Singular { index: usize, distance: f64, t: f64 },

    #[error("step size underflow at t = {t} s (h = {h:e} s)")]
    StepUnderflow { t: f64, h: f64 },

    #[error("dense evaluation at tau = {tau} outside [0, {h}]")]
    OutOfSpan { tau: f64, h: f64 },

    #[error("rank-deficient least-squares problem: rank {rank} < {unknowns} unknowns")]
    RankDeficient { rank: usize, unknowns: usize },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl SwarmError {
    /// True for faults raised while integrating the dynamics.
    pub fn is_dynamics_fault(&self) -> bool {
        matches!(self, SwarmError::Singular { .. } | SwarmError::StepUnderflow { .. })
    }
}

pub type Result<T, E = SwarmError> = std::result::Result<T, E>;
