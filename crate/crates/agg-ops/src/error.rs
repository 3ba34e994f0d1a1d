use agg_core::CoreError;
use agg_hash::HashError;
use agg_run::RunError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OpsError {
    #[error("memory budget of {0} frames is too small for this operator")]
    InvalidBudget(usize),
    #[error("input declared sorted arrived out of key order")]
    Unsorted,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Hash(#[from] HashError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
