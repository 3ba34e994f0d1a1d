//! Frames, records, bounded-state aggregates and the frame budget shared by
//! every aggregation operator.

mod aggregate;
mod alloc;
mod error;
mod frame;
mod metrics;
pub mod record;
pub mod sort;
mod stats;

pub use aggregate::{apply_aggregate, AggSpec, AggState, AggregateFunction};
pub use alloc::FrameAllocator;
pub use error::CoreError;
pub use frame::{Frame, FrameKind, Records, FRAME_HEADER};
pub use metrics::Metrics;
pub use record::{deserialize_record, serialize_record, GroupRecord, InputRecord};
pub use stats::DatasetStats;

/// Default frame size in bytes.
pub const DEFAULT_FRAME_SIZE: usize = 32 * 1024;

/// Width of every numeric field on the wire.
pub const FIELD_BYTES: usize = 8;
