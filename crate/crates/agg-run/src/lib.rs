//! Spill files, loser-tree merging and pipelined grouping of sorted streams.

mod error;
mod group;
mod loser;
mod merge;
mod output;
mod run;
mod spill;

pub use error::RunError;
pub use group::{pipelined_group, Grouper};
pub use loser::LoserTree;
pub use merge::{merge_runs, plan_round, MergeOptions, MergeTrace};
pub use output::OutputWriter;
pub use run::{scan_run, OrderKind, RunFile, RunReader, RunWriter, RUN_HEADER};
pub use spill::SpillDir;
