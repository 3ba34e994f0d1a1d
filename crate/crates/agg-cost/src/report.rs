use std::fmt::Write as _;

use agg_ops::AlgorithmId;

/// Cost of one phase of an algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct Phase {
    pub name: &'static str,
    pub comparisons: f64,
    pub frames_read: f64,
    pub frames_written: f64,
}

/// Predicted cost of one algorithm on one input. Frame counts exclude the
/// input scan and the output, like the model-comparable metric columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub algorithm: AlgorithmId,
    pub memory: usize,
    pub comparisons: f64,
    pub frames_read: f64,
    pub frames_written: f64,
    /// Expected spilled runs sent to Hash-Sort.
    pub fallbacks: f64,
    pub grace_partitionings: f64,
    pub max_level: u32,
    pub phases: Vec<Phase>,
}

/// Row context for [`CostReport::csv_row`].
#[derive(Debug, Clone, PartialEq)]
pub struct RowContext<'a> {
    pub fudge: f64,
    pub slot_ratio: f64,
    pub distribution: &'a str,
    pub n: u64,
    pub m: u64,
    pub seed: u64,
}

pub const CSV_HEADER: &str =
    "algo,M,F,slot_ratio,distribution,n,m,comparisons,frames_read,frames_written,ttfr_ms,total_ms,seed";

impl CostReport {
    pub(crate) fn new(algorithm: AlgorithmId, memory: usize) -> Self {
        CostReport {
            algorithm,
            memory,
            comparisons: 0.0,
            frames_read: 0.0,
            frames_written: 0.0,
            fallbacks: 0.0,
            grace_partitionings: 0.0,
            max_level: 0,
            phases: Vec::new(),
        }
    }

    pub(crate) fn add(&mut self, name: &'static str, comparisons: f64, read: f64, written: f64) {
        self.comparisons += comparisons;
        self.frames_read += read;
        self.frames_written += written;
        match self.phases.iter_mut().find(|p| p.name == name) {
            Some(p) => {
                p.comparisons += comparisons;
                p.frames_read += read;
                p.frames_written += written;
            }
            None => self.phases.push(Phase { name, comparisons, frames_read: read, frames_written: written }),
        }
    }

    pub fn phase(&self, name: &str) -> Option<&Phase> {
        self.phases.iter().find(|p| p.name == name)
    }

    /// One CSV row in the measurement schema; timing columns stay empty.
    pub fn csv_row(&self, cx: &RowContext<'_>) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "{},{},{},{},{},{},{},{:.0},{:.0},{:.0},,,{}",
            self.algorithm,
            self.memory,
            cx.fudge,
            cx.slot_ratio,
            cx.distribution,
            cx.n,
            cx.m,
            self.comparisons,
            self.frames_read.round(),
            self.frames_written.round(),
            cx.seed
        );
        s
    }
}
