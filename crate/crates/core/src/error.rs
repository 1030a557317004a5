//! Error type shared across the library.

use thiserror::Error;

/// Errors returned by bound evaluation, simulation, and verification.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter failed validation against its domain.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// An operation-specific precondition does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// The local randomizer's delta0 exceeds the admissibility threshold
    /// for conversion to a pure-DP randomizer.
    #[error(
        "delta0 = {delta0:e} inadmissible: exceeds threshold {threshold:e} \
         for eps0 = {eps0}, delta1 = {delta1:e}"
    )]
    InadmissibleDelta0 {
        eps0: f64,
        delta0: f64,
        delta1: f64,
        threshold: f64,
    },

    /// A vector had the wrong dimension.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// Exhaustive enumeration would exceed the outcome-space cap.
    #[error("enumeration requires {required} atoms, cap is {cap}")]
    EnumerationCap { required: u128, cap: u128 },

    /// The optimizer did not reach the requested tolerance.
    #[error("optimizer did not converge: residual {residual:e} after {iterations} iterations")]
    NonConvergence { residual: f64, iterations: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
