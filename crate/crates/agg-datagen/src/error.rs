use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("{m} distinct keys cannot fit in {n} records")]
    TooManyKeys { n: u64, m: u64 },
    #[error("a dataset needs at least one key")]
    NoKeys,
    #[error("skew parameter {0} must lie strictly between 0 and 1")]
    BadSkew(f64),
    #[error("key count {0} exceeds the key space")]
    KeySpace(u64),
    #[error("unknown distribution {0:?}")]
    UnknownDistribution(String),
    #[error("malformed dataset file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Core(#[from] agg_core::CoreError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
