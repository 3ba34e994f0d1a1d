use std::path::PathBuf;

use agg_core::{AggSpec, DatasetStats, DEFAULT_FRAME_SIZE};

use crate::select::AlgorithmId;

/// Everything an operator needs before the first frame arrives.
#[derive(Debug, Clone)]
pub struct OperatorConfig {
    pub algorithm: AlgorithmId,
    /// Budget M in frames.
    pub memory: usize,
    pub frame_size: usize,
    pub aggs: AggSpec,
    /// Slots per group of table capacity.
    pub slot_ratio: f64,
    /// Multiplied by the table's space overhead to give the fudge factor F.
    pub fudge: f64,
    /// Input and output size estimate; required by the hybrid-hash operators.
    pub estimate: Option<DatasetStats>,
    pub seed: u64,
    /// Parent directory for spill files; the system temp dir when unset.
    pub spill_parent: Option<PathBuf>,
    /// Record resident and spilled keys per Pre-Partitioning pass.
    pub audit: bool,
    /// Expected key length, used to size hash tables.
    pub key_bytes: usize,
    /// Input arrives in key order; Sort-based then aggregates in one scan.
    pub sorted_input: bool,
}

impl OperatorConfig {
    pub fn new(algorithm: AlgorithmId, memory: usize) -> Self {
        OperatorConfig {
            algorithm,
            memory,
            frame_size: DEFAULT_FRAME_SIZE,
            aggs: AggSpec::sum(),
            slot_ratio: 1.0,
            fudge: 1.2,
            estimate: None,
            seed: 0,
            spill_parent: None,
            audit: false,
            key_bytes: 15,
            sorted_input: false,
        }
    }

    pub fn frame_size(mut self, p: usize) -> Self {
        self.frame_size = p;
        self
    }

    pub fn aggs(mut self, aggs: AggSpec) -> Self {
        self.aggs = aggs;
        self
    }

    pub fn estimate(mut self, stats: DatasetStats) -> Self {
        self.estimate = Some(stats);
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn audit(mut self, on: bool) -> Self {
        self.audit = on;
        self
    }

    pub fn key_bytes(mut self, n: usize) -> Self {
        self.key_bytes = n;
        self
    }

    pub fn sorted_input(mut self, on: bool) -> Self {
        self.sorted_input = on;
        self
    }

    pub fn slot_ratio(mut self, r: f64) -> Self {
        self.slot_ratio = r;
        self
    }

    /// Bytes of one group record for the configured key length.
    pub fn group_bytes(&self) -> usize {
        self.aggs.group_record_len(self.key_bytes)
    }
}
