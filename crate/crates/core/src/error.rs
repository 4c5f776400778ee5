use thiserror::Error;

/// Errors produced by the simulation building blocks.
#[derive(Debug, Error)]
pub enum Error {
    /// A scenario or operation parameter violates its contract.
    #[error("configuration error: {0}")]
    Config(String),

    /// Two grid-sampled objects were combined but live on different grids.
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    /// The adaptive integrator gave up.
    #[error("integration failure at t={t_hours} h, position ({x}, {y}) km: {reason}")]
    Integration {
        t_hours: f64,
        x: f64,
        y: f64,
        reason: String,
    },

    /// Operation applied to an empty or degenerate input.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Numeric argument outside the function's domain.
    #[error("domain error: {0}")]
    NumericDomain(String),

    /// Iterative solver failed to meet its residual tolerance.
    #[error("solver failure: {0}")]
    Solver(String),

    /// Malformed on-disk data.
    #[error("format error: {0}")]
    Format(String),

    /// Config file parse error with line attribution.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
