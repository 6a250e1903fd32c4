use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not Hermitian (max deviation {0:e})")]
    Hermiticity(f64),
    #[error("non-finite matrix entry")]
    NonFinite,
    #[error("degenerate denominator: <v|A|v> = {expectation} equals tr A / N = {mean}")]
    DegenerateDenominator { expectation: f64, mean: f64 },
    #[error("observable has zero trace")]
    ZeroTrace,
    #[error("observable has zero expectation in v")]
    ZeroExpectation,
    #[error("vector is not normalised (norm {0})")]
    InvalidVector(f64),
    #[error("negative square-root argument {value:e} for Kraus operator {tag}")]
    NegativeSqrtArgument { tag: String, value: f64 },
    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),
    #[error("invalid environment state: {0}")]
    InvalidEnvState(String),
    #[error("map is not idempotent on the evolution generator (deviation {0:e})")]
    NotIdempotent(f64),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid time grid: {0}")]
    InvalidTimes(String),
}

impl Error {
    /// Stable machine-readable code used by the CLI error JSON.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "DimensionError",
            Error::Hermiticity(_) => "HermiticityError",
            Error::NonFinite => "NonFinite",
            Error::DegenerateDenominator { .. } => "DegenerateDenominator",
            Error::ZeroTrace => "ZeroTrace",
            Error::ZeroExpectation => "ZeroExpectation",
            Error::InvalidVector(_) => "InvalidVector",
            Error::NegativeSqrtArgument { .. } => "NegativeSqrtArgument",
            Error::InvalidDensityMatrix(_) => "InvalidDensityMatrix",
            Error::InvalidEnvState(_) => "InvalidEnvState",
            Error::NotIdempotent(_) => "NotIdempotent",
            Error::Domain(_) => "DomainError",
            Error::InvalidTimes(_) => "InvalidTimes",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
