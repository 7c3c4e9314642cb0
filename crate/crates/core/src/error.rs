use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Working precision could not certify a quantity; raise `precision_bits`.
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),

    /// A continued-fraction expansion terminated (the input is rational).
    #[error("continued fraction terminates after {terms} terms (rational input)")]
    RationalExpansion { terms: usize },

    #[error("exhaustive limit exceeded: K = {k} > {limit}")]
    ExhaustiveLimitExceeded { k: usize, limit: usize },

    #[error("no color class is dense at resolution {delta_grid} on an interval of length >= {min_len}")]
    NoDenseInterval { delta_grid: f64, min_len: f64 },

    #[error("search exhausted: {0}")]
    SearchExhausted(String),

    #[error("certificate failed: {0}")]
    CertificateFailed(String),

    #[error("N = {n} is below the minimal admissible order N_0 = {n0}")]
    TooSmallN { n: u64, n0: u64 },

    #[error("internal invariant broken: {0}")]
    InternalInvariantBroken(String),

    #[error("unsupported field order q = {0}")]
    UnsupportedField(u64),

    #[error("shift matrix needs a direction with nonzero second coordinate")]
    ZeroSecondCoordinate,

    #[error("pruned projection too small: {size} < q^2/(4t) = {required}")]
    PruningAssumptionFailed { size: u64, required: f64 },

    #[error("no admissible direction found: {0}")]
    NoDirectionFound(String),

    #[error("oracle limit exceeded: {0}")]
    OracleLimitExceeded(String),

    #[error("precondition: {0}")]
    Precondition(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short machine-readable tag, used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::PrecisionExhausted(_) => "PrecisionExhausted",
            Error::RationalExpansion { .. } => "RationalExpansion",
            Error::ExhaustiveLimitExceeded { .. } => "ExhaustiveLimitExceeded",
            Error::NoDenseInterval { .. } => "NoDenseInterval",
            Error::SearchExhausted(_) => "SearchExhausted",
            Error::CertificateFailed(_) => "CertificateFailed",
            Error::TooSmallN { .. } => "TooSmallN",
            Error::InternalInvariantBroken(_) => "InternalInvariantBroken",
            Error::UnsupportedField(_) => "UnsupportedField",
            Error::ZeroSecondCoordinate => "ZeroSecondCoordinate",
            Error::PruningAssumptionFailed { .. } => "PruningAssumptionFailed",
            Error::NoDirectionFound(_) => "NoDirectionFound",
            Error::OracleLimitExceeded(_) => "OracleLimitExceeded",
            Error::Precondition(_) => "Precondition",
            Error::Parse(_) => "Parse",
        }
    }
}
