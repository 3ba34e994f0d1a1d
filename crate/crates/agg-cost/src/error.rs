use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{0}")]
    Domain(String),
    #[error("memory budget of {0} frames is too small")]
    InvalidBudget(usize),
    #[error("no root found for {0}")]
    NoRoot(&'static str),
    #[error(transparent)]
    Ops(#[from] agg_ops::OpsError),
    #[error(transparent)]
    Hash(#[from] agg_hash::HashError),
}

pub(crate) fn domain(cond: bool, msg: impl FnOnce() -> String) -> Result<(), ModelError> {
    if cond {
        Ok(())
    } else {
        Err(ModelError::Domain(msg()))
    }
}
