use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("frame budget exhausted ({budget} frames outstanding)")]
    BudgetExhausted { budget: usize },
    #[error("frame full: record needs {needed} bytes, {free} free")]
    FrameFull { needed: usize, free: usize },
    #[error("invalid record: {0}")]
    InvalidRecord(&'static str),
    #[error("invalid dataset statistics: {0}")]
    InvalidStats(&'static str),
    #[error("corrupt frame: {0}")]
    Corrupt(String),
}
