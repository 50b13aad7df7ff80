use thiserror::Error;

/// Errors produced by the alignment toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("sequence must contain at least one frame")]
    EmptySequence,

    #[error("ragged rows: row 0 has dimension {expected}, row {row} has dimension {found}")]
    RaggedRows {
        expected: usize,
        row: usize,
        found: usize,
    },

    #[error("feature dimension must be at least 1")]
    ZeroDimension,

    #[error("matrix has {rows}x{cols} shape but {len} values")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        len: usize,
    },

    #[error("non-finite value at ({row}, {col})")]
    NonFiniteCost { row: usize, col: usize },

    #[error("piano roll entry at ({row}, {col}) is {value}, expected 0 or 1")]
    NotBinary { row: usize, col: usize, value: f64 },

    #[error("piano roll must have 72 pitch columns, got {0}")]
    WrongWidth(usize),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("length mismatch: {left} vs {right} frames")]
    LengthMismatch { left: usize, right: usize },

    #[error("temperature must be positive and finite, got {0}")]
    InvalidGamma(f64),

    #[error("{paths} warping paths exceed the enumeration limit of {limit}")]
    TooLarge { paths: u128, limit: u128 },

    #[error("cannot stretch a sequence of {from} frames down to {to} frames")]
    ShrinkNotSupported { from: usize, to: usize },

    #[error("label variant requires a score roll")]
    MissingScore,

    #[error("label variant requires a strongly aligned roll")]
    MissingStrong,

    #[error("reference has no positive cells; average precision is undefined")]
    AllNegatives,

    #[error(
        "first-batch loss {0} is not a positive finite value and cannot be used for normalisation"
    )]
    DegenerateNormalizer(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
