use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("row {row}: {reason}")]
    InvalidRow { row: usize, reason: String },
    #[error("class {class} has positive weight but no evaluation samples")]
    MissingClass { class: usize },
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("fused scores sum to zero")]
    DegenerateScore,
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    /// True for failures of the numerics (as opposed to malformed inputs).
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFinite(_) | Error::DegenerateScore)
    }
}
