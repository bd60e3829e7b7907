use thiserror::Error;

pub type Result<T> = std::result::Result<T, IsacError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IsacError {
    /// A configuration value broke one of its invariants.
    #[error("invalid configuration for `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("odd bit count ({0}); QPSK needs pairs")]
    OddBitCount(usize),

    #[error("PRS and DMRS collide at RE (m={m}, n={n})")]
    Overlap { m: usize, n: usize },

    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("insufficient peaks: wanted {wanted}, found {found}")]
    InsufficientPeaks { wanted: usize, found: usize },

    #[error("empty {0} selection")]
    EmptySelection(&'static str),

    #[error("no communication power, channel unobservable")]
    Unobservable,

    #[error("{0}")]
    Runtime(String),
}

impl IsacError {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        IsacError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
