use std::path::PathBuf;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain the operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative method or quadrature did not reach its tolerance.
    #[error("{method} failed to converge: {detail}")]
    Convergence {
        method: &'static str,
        detail: String,
    },

    /// Coefficient data violates one of the structural assumptions.
    #[error("coefficient validation failed ({assumption}) at {location}: {detail}")]
    Validation {
        assumption: String,
        location: String,
        detail: String,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Spectral inversion would amplify a mode beyond double-precision headroom.
    #[error("mode {mode}: amplification {amplification:e} exceeds limit {limit:e}")]
    ModeOverflow {
        mode: usize,
        amplification: f64,
        limit: f64,
    },

    #[error("linear solve failed: {0}")]
    Solve(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error(
        "discrepancy principle could not bracket target residual {target:e} \
         (residual {low_residual:e} at smallest epsilon, {high_residual:e} at largest)"
    )]
    Bracketing {
        target: f64,
        low_residual: f64,
        high_residual: f64,
    },

    #[error("training diverged at epoch {epoch}: loss {loss:e} (initial {initial:e})")]
    Divergence {
        epoch: usize,
        loss: f64,
        initial: f64,
    },

    /// A failure while producing one numbered sample of a dataset.
    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("format error in {path}: {detail}")]
    Format { path: PathBuf, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn format(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            detail: detail.into(),
        }
    }
}
