use thiserror::Error;

/// Errors produced anywhere in the detection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    #[error("degenerate projection draw for (m={m}, n={n}, seed={seed}) after {attempts} attempts")]
    DegenerateProjection {
        m: usize,
        n: usize,
        seed: u64,
        attempts: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("model construction failed: {reason} (minimum eigenvalue {min_eigenvalue:e})")]
    ModelConstruction { reason: String, min_eigenvalue: f64 },

    #[error("copula fit failed for {family}: {reason}")]
    Fit { family: String, reason: String },

    #[error("least-squares system is singular (condition estimate {condition:e}); reduce |U| or increase M")]
    LeastSquares { condition: f64 },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
