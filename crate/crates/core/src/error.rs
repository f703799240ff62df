use thiserror::Error;

/// Errors raised by the spectral analysis pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectraError {
    #[error("invalid input at index {index}: {reason}")]
    Validation { index: usize, reason: String },

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("point {x} is within {distance:e} of the pole at {pole}")]
    Pole { x: f64, pole: f64, distance: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("bulk structure violates the critical-point pattern: {0}")]
    Structure(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: String, found: String },

    #[error("replicate {replicate}: {source}")]
    Replicate {
        replicate: usize,
        #[source]
        source: Box<SpectraError>,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, SpectraError>;
