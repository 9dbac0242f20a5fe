use thiserror::Error;

/// Errors raised by the truncated models and the transform calculus.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("basis dimension {dim} exceeds the size cap {cap}")]
    DimensionOverflow { dim: u128, cap: usize },

    #[error("word of length {len} lies outside the truncation level {max_len}")]
    OutOfTruncation { len: usize, max_len: usize },

    #[error("letter {letter} is out of range 1..={n}")]
    LetterOutOfRange { letter: usize, n: usize },

    /// The requested quantity would need levels above the truncation; the
    /// compressed model would silently return a wrong value.
    #[error("truncation unsound: needs level {needed}, truncation is {max_len}")]
    TruncationUnsound { needed: usize, max_len: usize },

    #[error("parameter mismatch: {0}")]
    ParamMismatch(String),

    #[error("matrix is not orthogonal (deviation {0:e})")]
    NotOrthogonal(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("moment sequence is not a measure: {0}")]
    NotAMeasure(String),

    #[error("insufficient moment order: need {needed}, have {available}")]
    InsufficientOrder { needed: usize, available: usize },

    #[error("series order mismatch: {left} vs {right}")]
    OrderMismatch { left: usize, right: usize },

    #[error("value not representable in the exact field: {0}")]
    NotRepresentable(String),

    #[error("no atom: {0}")]
    NoAtom(String),

    #[error("divergent series: {0}")]
    Divergent(String),

    #[error("degenerate characteristic roots: {0}")]
    DegenerateRoots(String),

    #[error("regime violation: {0}")]
    Regime(String),

    #[error("not a density: {0}")]
    NotADensity(String),

    #[error("identity check failed: {0}")]
    IdentityFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
