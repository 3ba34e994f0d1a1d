use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config: {0}")]
    Config(String),
    #[error("oracle mismatch: {0}")]
    Oracle(String),
    #[error(transparent)]
    Spec(#[from] agg_datagen::SpecError),
    #[error(transparent)]
    Ops(#[from] agg_ops::OpsError),
    #[error(transparent)]
    Model(#[from] agg_cost::ModelError),
    #[error(transparent)]
    Core(#[from] agg_core::CoreError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
