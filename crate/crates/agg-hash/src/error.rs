use agg_core::CoreError;
use agg_run::RunError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HashError {
    #[error("table needs at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("slot ratio must be positive")]
    BadSlotRatio,
    #[error("destination table ran out of capacity during rehash")]
    CapacityExceeded,
    #[error("no list frame left to give away")]
    NoFrame,
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Run(#[from] RunError),
}
