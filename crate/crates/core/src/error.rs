use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("{0} requires Monte Carlo estimation (no closed form available)")]
    NeedsEstimation(String),

    #[error("unsupported family: {0}")]
    UnsupportedFamily(String),

    #[error("enumeration limit exceeded: {outcomes} outcomes > cap {cap}")]
    EnumerationLimit { outcomes: u128, cap: u128 },

    #[error("divergence suspected: {0}")]
    DivergenceSuspected(String),

    #[error("estimator inapplicable: {0}")]
    EstimatorInapplicable(String),

    #[error("identity failure: {check} at level {level}, atom {atom}: {detail}")]
    IdentityFailure {
        check: String,
        level: usize,
        atom: usize,
        detail: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
