use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("{what} is outside its domain (got {value})")]
    Domain { what: &'static str, value: f64 },

    #[error("integrand is not finite at {location}")]
    Integration { location: f64 },

    #[error("integral diverges: {0}")]
    Divergent(String),

    #[error("unsupported: {0}")]
    Unsupported(&'static str),

    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("linear solve failed: {0}")]
    Solver(String),
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn domain(what: &'static str, value: f64) -> LabError {
    LabError::Domain { what, value }
}
