use agg_core::CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("corrupt run file {path}: {reason}")]
    Corrupt { path: String, reason: String },
    #[error("merge input out of order")]
    OrderViolation,
}
