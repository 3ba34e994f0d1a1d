//! Static chained hash table with frame-backed list storage, per-slot bloom
//! bytes and region-wise spilling.

mod error;
pub mod hash;
mod layout;
mod table;

pub use error::HashError;
pub use hash::{bloom_false_positive, hash_key};
pub use layout::{TableLayout, LINK_BYTES, SLOT_BYTES};
pub use table::{ChainedHashTable, Insert, Probe, RegionId};
