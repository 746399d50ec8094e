use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid token {0:?}: tokens must be non-empty and contain no whitespace")]
    InvalidToken(String),

    #[error("line {line}: {reason}")]
    Malformed { line: u64, reason: String },

    #[error("expected {expected} pairs, found a pair with origin {found}")]
    OriginMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("{name} must lie in {range}, got {value}")]
    OutOfRange {
        name: &'static str,
        range: &'static str,
        value: f64,
    },

    #[error("reserved token {token:?} already present in input at position {position}")]
    ReservedCollision { token: String, position: usize },

    #[error("metadata key {0:?} missing")]
    MissingMetadata(String),

    #[error("metadata value {0:?} cannot be used in a tag")]
    InvalidMetadata(String),

    #[error("cannot sample {requested} items from a corpus of {available}")]
    SampleTooLarge { requested: usize, available: usize },

    #[error("{0} is empty")]
    EmptyInput(&'static str),

    #[error("hypothesis count {hyps} does not match reference count {refs}")]
    LengthMismatch { hyps: usize, refs: usize },

    #[error("column {index} out of range for source length {len}")]
    ColumnOutOfRange { index: usize, len: usize },

    #[error("length-normalized entropy needs a source of at least 2 tokens")]
    DegenerateSource,

    #[error("invalid attention matrix: {0}")]
    InvalidMatrix(String),

    #[error("token {0:?} has no source-side translation")]
    Untranslatable(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
