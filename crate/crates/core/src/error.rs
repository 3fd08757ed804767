use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),

    #[error("axis sets overlap: {0}")]
    OverlappingAxes(String),

    #[error("missing axis `{0}`")]
    MissingAxis(String),

    #[error("symbol `{symbol}` is not in alphabet `{alphabet}`")]
    UnknownSymbol { alphabet: String, symbol: String },

    #[error("sequence length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("{what}: size {size} exceeds cap {cap}")]
    CapExceeded { what: String, size: f64, cap: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("Markov chain violated: {0}")]
    MarkovViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
