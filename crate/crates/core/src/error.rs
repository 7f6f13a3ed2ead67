use thiserror::Error;

/// Every failure the laboratory can report.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("structural error: {0}")]
    Structure(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quantity is undefined at the identity element")]
    UndefinedAtIdentity,

    #[error("non-finite integrand at interior node {0:?}; use the annulus rule")]
    SingularIntegrand(Vec<f64>),

    #[error("hypothesis violation: {0}")]
    Hypothesis(String),

    #[error("degenerate solution: {0}")]
    Degenerate(String),

    #[error(
        "series remainder {remainder:e} exceeds tolerance {tolerance:e} on radius {radius}; \
         need truncation order >= {required_order}"
    )]
    Truncation {
        remainder: f64,
        tolerance: f64,
        radius: f64,
        required_order: usize,
    },

    #[error("iterative solver stalled after {iterations} iterations (last residual {last:e})")]
    NoConvergence {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("empty sample set")]
    EmptySamples,

    #[error("config error: {0}")]
    Config(String),

    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
