//! The aggregation operators, their partition planning and the algorithm
//! selector.

mod config;
mod driver;
mod dynamic;
mod error;
mod grace;
mod hash_sort;
mod original;
mod plan;
mod prepart;
mod select;
mod shared;
mod sort_based;

pub use config::OperatorConfig;
pub use driver::{AuditEntry, Operator, Report};
pub use dynamic::destaging_partitions;
pub use error::OpsError;
pub use plan::{fallback_controller, plan_hybrid, sort_levels, split, Fallback, HybridHashPlan, Partitioner};
pub use select::{select_algorithm, AlgorithmId, SelectorInput};
