use alloc::string::String;

/// Errors raised by the core crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid point configuration: {0}")]
    InvalidConfiguration(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// `∫ (1 ∧ x_1²) Λ(dx)` is infinite.
    #[error("Lévy integrability fails: {0}")]
    LevyIntegrability(String),
    /// `∫ (1_{x_1>1} e^{θx_1} + Σ_{k≥2} e^{θx_k}) Λ(dx)` is infinite.
    #[error("exponential integrability fails at theta = {theta}: {reason}")]
    ExponentialIntegrability { theta: f64, reason: String },
    #[error("integral did not converge: {0}")]
    Quadrature(String),
    /// The branching part of the (truncated) measure has infinite mass.
    #[error("infinite branching rate: {0}; truncate further")]
    InfiniteBranchingRate(String),
    #[error("the tilted measure has zero total rate: no branching events")]
    NoBranchingEvents,
    #[error("cannot select a spine child: every entry is -inf")]
    EmptyConfiguration,
    #[error("population caps exhausted before the first query time ({0})")]
    Overflow(String),
    #[error("{0}")]
    Experiment(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
