//! Analytical cost models: expected key comparisons and spill I/O of the
//! aggregation operators on uniform inputs.

pub mod components;
mod error;
mod models;
mod params;
mod report;

pub use components::{
    c_hash, c_hash_mixed, c_sort, c_unique, h_u, i_key, i_raw, merge_cost, solve_u, Generator, MergeCost,
};
pub use error::ModelError;
pub use models::predict;
pub use params::CostParameters;
pub use report::{CostReport, Phase, RowContext, CSV_HEADER};
