use thiserror::Error;

/// Errors raised by model construction, the trajectory engines and the oracles.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("state is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "rate operator has eigenvalue {eigenvalue:e} < 0 at t = {t}: dynamics is not P-divisible here, use the general engine"
    )]
    PDivisibilityViolation { t: f64, eigenvalue: f64 },

    #[error("negative rate c = {rate} for term {term} at t = {t}: MCWF jump probability would be negative")]
    NegativeRate { t: f64, term: usize, rate: f64 },

    #[error("deterministic step norm {norm} left (0.5, 1.5): time step too large")]
    NormCollapse { norm: f64 },

    #[error("time step too large at t = {t}: {reason}")]
    StepSize { t: f64, reason: String },

    #[error("negative channel of class {class} (eigenvalue {eigenvalue:e}) has no matching source class")]
    UnmatchedChannel { class: usize, eigenvalue: f64 },

    #[error("integration is unstable at t = {t} (drift {drift:e})")]
    Unstable { t: f64, drift: f64 },

    #[error("ensemble is empty")]
    EmptyEnsemble,

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
