//! Experiment harness: datasets, operator runs, model predictions and their
//! comparison.

pub mod config;
mod error;
pub mod experiment;
pub mod runner;

pub use config::{parse_memory, parse_ratio, ExperimentConfig};
pub use error::BenchError;
pub use experiment::{relative_error, Loaded, RunRow, ValidationRow};
pub use runner::{check, run_cell, Cell, CellOutcome};
