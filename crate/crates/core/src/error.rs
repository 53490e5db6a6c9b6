use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("basis too large: {requested} exceeds the cap of {cap} ({what})")]
    SizeCap {
        what: &'static str,
        requested: usize,
        cap: usize,
    },

    #[error("operation requires a square grid lattice, got {0}")]
    NotSquareGrid(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("time {t} outside schedule range [0, {duration}]")]
    TimeOutOfRange { t: f64, duration: f64 },

    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("integration diverged: norm drift {drift:e} exceeds {limit:e}; reduce substep_dt")]
    Integration { drift: f64, limit: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("resonance pole: 4 V(sqrt2 a) equals the detuning")]
    Pole,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
