use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what}: argument {value} is outside the domain")]
    Domain { what: &'static str, value: f64 },

    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("quadrature on [{lower}, {upper}] did not converge: estimate {estimate:e}, error {error:e}")]
    QuadratureNotConverged {
        lower: f64,
        upper: f64,
        estimate: f64,
        error: f64,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("sample counts differ: {left} vs {right}")]
    CountMismatch { left: usize, right: usize },

    #[error("exact matching is capped at {cap} points, got {count}")]
    TooManyPoints { count: usize, cap: usize },

    #[error("rate fit needs at least {needed} points, got {found}")]
    TooFewPoints { needed: usize, found: usize },

    #[error("rate fit requires positive values, got {value} at n = {n}")]
    NonPositive { n: f64, value: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
