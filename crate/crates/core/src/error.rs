use thiserror::Error;

/// Errors shared across the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid dimension too small: nx={nx}, ny={ny} (need at least 4x4)")]
    GridTooSmall { nx: usize, ny: usize },

    #[error("non-positive domain length: Lx={lx}, Ly={ly}")]
    NonPositiveLength { lx: f64, ly: f64 },

    #[error("grid mismatch between operands: {0}")]
    GridMismatch(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("CFL violation at step {step}: dt={dt:.3e} exceeds limit {limit:.3e} (max |v| = {vmax:.3e})")]
    CflViolation {
        step: usize,
        dt: f64,
        limit: f64,
        vmax: f64,
    },

    #[error("non-finite values detected in {context}")]
    NonFinite { context: &'static str },

    #[error("trajectory mismatch: {0}")]
    TrajectoryMismatch(&'static str),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("snapshot format error: {0}")]
    SnapshotFormat(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
