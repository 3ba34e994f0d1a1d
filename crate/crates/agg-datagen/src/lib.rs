//! Seeded benchmark datasets: ip-style string keys with a revenue payload
//! under five key distributions.

mod dataset;
mod error;
mod file;
mod spec;

pub use dataset::{Dataset, GroundTruth};
pub use error::SpecError;
pub use file::{read_truth, DatasetReader};
pub use spec::{cardinality_ratio, key_bytes, DatasetSpec, Distribution, KeyStyle};
