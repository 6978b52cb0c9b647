use thiserror::Error;

use crate::model::Violation;

/// Errors shared across the library surface.
#[derive(Debug, Error)]
pub enum VolCevError {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The model spec does not support the requested computation.
    #[error("validation failed: {}", format_violations(.0))]
    Validation(Vec<Violation>),

    /// A numerical routine did not reach its accuracy target.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// Gamma function evaluated at a non-positive integer.
    #[error("gamma pole at {0}")]
    GammaPole(f64),

    /// Result exceeds the representable range; use a log-space variant.
    #[error("overflow for argument {0}; use the log-space or scaled variant")]
    Overflow(f64),

    /// Invalid special-function parameter (e.g. Kummer b a non-positive integer).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

fn format_violations(vs: &[Violation]) -> String {
    vs.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, VolCevError>;
