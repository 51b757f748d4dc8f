use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension {requested} exceeds the configured cap {cap}")]
    DimensionCap { requested: u128, cap: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("operator is not Hermitian (max |H - H^dagger| = {0:e})")]
    NotHermitian(f64),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid subsystem selection: {0}")]
    InvalidSubsystems(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("argument outside the supported domain: {0}")]
    Domain(String),
    #[error("quadrature did not converge: estimated error {estimate:e} above tolerance {tolerance:e}")]
    Quadrature { estimate: f64, tolerance: f64 },
    #[error("Fock truncation did not converge: deviation {deviation:e} at n_max = {n_max}")]
    Truncation { deviation: f64, n_max: usize },
    #[error("trajectory spans do not match: {0}")]
    SpanMismatch(String),
    #[error("unsupported configuration: {0}")]
    Capability(String),
}

pub type Result<T> = core::result::Result<T, Error>;
