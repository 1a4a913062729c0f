use thiserror::Error;

/// Errors produced by the block pipeline, the feasibility search and the
/// detectors built on top of it.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid block shape {rows}x{cols}")]
    InvalidShape { rows: usize, cols: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("quantization table entry {index} must be >= 1 (got {value})")]
    InvalidQuant { index: usize, value: i32 },

    #[error("pixel value {value} at index {index} outside [0, 255]")]
    PixelOutOfRange { index: usize, value: i32 },

    #[error("non-finite value cannot be rounded: {0}")]
    NonFinite(f64),

    #[error("strictness tolerance must be positive (got {0})")]
    InvalidEpsilon(f64),

    #[error("malformed constraint system: {0}")]
    MalformedSystem(String),

    #[error("budget must allow at least one node and a non-zero time")]
    ZeroBudget,

    #[error("an unbounded search was requested for a {rows}x{cols} block; set a node or time limit")]
    UnboundedBudget { rows: usize, cols: usize },

    #[error("enumeration of {candidates} candidates exceeds the cap of {cap}")]
    EnumerationCap { candidates: u128, cap: u128 },

    #[error("candidate antecedent leaves pixel range at index {index} (value {value})")]
    CandidateOutOfRange { index: usize, value: i32 },

    #[error("cannot change {requested} coefficients of a block with {available}")]
    TooManyChanges { requested: usize, available: usize },

    #[error("invalid change set: {0}")]
    InvalidChange(String),

    #[error("payload must lie in [0, 1] (got {0})")]
    InvalidPayload(f64),

    #[error("probability must lie in [0, 1] (got {0})")]
    InvalidProbability(f64),

    #[error("budgets must be strictly ascending node limits or wall-clock limits")]
    UnsortedBudgets,

    #[error("score lists must not contain NaN")]
    NanScore,

    #[error("empty input: {0}")]
    Empty(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
