use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("size cap exceeded: {0}")]
    SizeCap(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("copy budget of {budget} exhausted")]
    Budget { budget: u64 },
    #[error("numerical invariant violated: {0}")]
    Numerical(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("overflow: {0}")]
    Overflow(String),
}

pub type Result<T> = std::result::Result<T, Error>;
