use thiserror::Error;

/// Errors produced by induction, decoding and evaluation operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("invalid data: {0}")]
    Data(String),

    /// Line-oriented file formats report the offending line (1-based).
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Bracketed-tree syntax errors report the character offset.
    #[error("parse error at offset {offset}: {msg}")]
    Syntax { offset: usize, msg: String },

    #[error("degenerate grammar: {0}")]
    DegenerateGrammar(String),

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
