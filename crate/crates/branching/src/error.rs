//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by law construction, transform evaluation, quadrature,
/// simulation, and verification.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument fell outside its mathematical domain.
    #[error("domain error: {what} = {value} is outside {expected}")]
    Domain {
        what: &'static str,
        value: f64,
        expected: &'static str,
    },

    /// Evaluation at a point where the function is singular.
    #[error("singularity: {0}")]
    Singularity(&'static str),

    /// The requested operation is only implemented for a restricted
    /// parametric family (e.g. series expansions for constant scale
    /// functions).
    #[error("unsupported family: {0}")]
    UnsupportedFamily(&'static str),

    /// An intermediate value exceeded the representable range cap.
    #[error("range error: {what} = {value:e} exceeds the supported range")]
    Range { what: &'static str, value: f64 },

    /// Adaptive quadrature or the ODE integrator could not reach the
    /// requested tolerance.
    #[error("integration failure: {0}")]
    IntegrationFailure(&'static str),

    /// A conditional quantity was requested where the conditioning event
    /// has vanishing probability.
    #[error("degenerate conditioning: {0}")]
    Degenerate(&'static str),

    /// A limit-law constant (Q or R) is infinite but required finite.
    #[error("unavailable constant: {0}")]
    UnavailableConstant(&'static str),

    /// Too few surviving replicates to form a conditional estimate.
    #[error("insufficient survivors: have {have}, need {need}")]
    InsufficientSurvivors { have: usize, need: usize },

    /// Invalid run configuration.
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
