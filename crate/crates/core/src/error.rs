use thiserror::Error;

/// Broad category of an [`Error`], used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed or out-of-range input.
    Validation,
    /// A configured size cap was exceeded.
    Cap,
    /// A checked mathematical invariant or certificate failed.
    Invariant,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("base M = {0} is too small (need M >= 3)")]
    BaseTooSmall(usize),
    #[error("digit {digit} is outside 0..{base}")]
    DigitOutOfRange { digit: usize, base: usize },
    #[error("digit {0} appears more than once")]
    DuplicateDigit(usize),
    #[error("alphabet is empty")]
    EmptyAlphabet,
    #[error("order k = {k} is too large: M^k exceeds the cap {cap}")]
    OrderTooLarge { k: u32, cap: u64 },
    #[error("order k = {k} is too small (need k >= {min})")]
    OrderTooSmall { k: u32, min: u32 },
    #[error("index {index} is outside 0..{n}")]
    IndexOutOfRange { index: u64, n: u64 },
    #[error("vector length {got} does not match transform size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("vector entry {0} is not finite")]
    NonFinite(usize),
    #[error("alphabet size {a} exceeds the dense cap {cap}")]
    DenseCapExceeded { a: usize, cap: usize },
    #[error("alphabet has A = {a} of M = {m}; need 1 < A < M")]
    TrivialAlphabet { m: usize, a: usize },
    #[error("space of {count} elements exceeds the enumeration cap {cap}")]
    EnumerationTooLarge { count: u128, cap: u64 },
    #[error("alphabets live in different bases ({0} vs {1})")]
    BaseMismatch(usize, usize),
    #[error("permutations have different shapes")]
    ShapeMismatch,
    #[error("Lipschitz constant must be positive, got {0}")]
    NonpositiveLipschitz(f64),
    #[error("input must be positive: {0}")]
    NonpositiveInput(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("iteration did not converge after {iterations} steps (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("length certificate violated at level {level} (blocks {blocks:?}, witness {witness:?}): {reason}")]
    CertificateViolation {
        level: usize,
        blocks: Vec<usize>,
        witness: Option<usize>,
        reason: String,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::OrderTooLarge { .. }
            | Error::DenseCapExceeded { .. }
            | Error::EnumerationTooLarge { .. } => ErrorKind::Cap,
            Error::NonConvergence { .. } | Error::CertificateViolation { .. } => {
                ErrorKind::Invariant
            }
            _ => ErrorKind::Validation,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
