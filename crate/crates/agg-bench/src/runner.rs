use std::path::PathBuf;

use agg_core::{AggSpec, AggregateFunction, DatasetStats, Frame, Metrics};
use agg_datagen::GroundTruth;
use agg_ops::{AlgorithmId, Operator, OperatorConfig};

use crate::error::BenchError;

/// One experiment cell: an algorithm under one memory budget.
#[derive(Debug, Clone)]
pub struct Cell {
    pub algorithm: AlgorithmId,
    pub memory: usize,
    pub frame_size: usize,
    pub slot_ratio: f64,
    pub fudge: f64,
    /// Multiplier applied to the true output size before it is handed to the
    /// operator as its estimate.
    pub g_error_ratio: f64,
    pub seed: u64,
    pub aggs: AggSpec,
    pub key_bytes: usize,
    pub audit: bool,
    /// The input is in key order and the operator is told so.
    pub sorted_input: bool,
    pub spill_parent: Option<PathBuf>,
}

impl Cell {
    pub fn new(algorithm: AlgorithmId, memory: usize) -> Self {
        Cell {
            algorithm,
            memory,
            frame_size: agg_core::DEFAULT_FRAME_SIZE,
            slot_ratio: 1.0,
            fudge: 1.2,
            g_error_ratio: 1.0,
            seed: 0,
            aggs: AggSpec::sum(),
            key_bytes: 15,
            audit: false,
            sorted_input: false,
            spill_parent: std::env::var_os("AGGBENCH_TMP").map(PathBuf::from),
        }
    }

    fn config(&self, stats: &DatasetStats) -> Result<OperatorConfig, BenchError> {
        let r = self.g_error_ratio;
        let estimate = DatasetStats::new(stats.r, stats.r_t, stats.g * r, (stats.g_t * r).min(stats.r_t))?;
        let mut cfg = OperatorConfig::new(self.algorithm, self.memory)
            .frame_size(self.frame_size)
            .aggs(self.aggs.clone())
            .estimate(estimate)
            .seed(self.seed)
            .audit(self.audit)
            .sorted_input(self.sorted_input)
            .key_bytes(self.key_bytes)
            .slot_ratio(self.slot_ratio);
        cfg.fudge = self.fudge;
        cfg.spill_parent = self.spill_parent.clone();
        Ok(cfg)
    }
}

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub metrics: Metrics,
    pub high_water: usize,
    pub audit: Vec<agg_ops::AuditEntry>,
    /// `Err` describes the first difference from the ground truth.
    pub verdict: Result<(), String>,
}

/// Runs `cell` over `frames` and checks the output against `truth`.
pub fn run_cell(
    frames: &[Frame],
    truth: &GroundTruth,
    stats: &DatasetStats,
    cell: &Cell,
) -> Result<CellOutcome, BenchError> {
    let mut op = Operator::open(cell.config(stats)?)?;
    let aggs = &cell.aggs;
    let mut out: Vec<(Vec<u8>, Vec<f64>)> = Vec::with_capacity(truth.len());
    let mut sink = |k: &[u8], s: &[u8]| out.push((k.to_vec(), aggs.finish(s)));
    for f in frames {
        op.push_frame(f, &mut sink)?;
    }
    let report = op.close(&mut sink)?;
    let verdict = check(&mut out, truth, aggs);
    Ok(CellOutcome { metrics: report.metrics, high_water: report.high_water, audit: report.audit, verdict })
}

/// Compares operator output with the ground truth; SUM and COUNT are checked
/// exactly, the other aggregates only for presence.
pub fn check(out: &mut [(Vec<u8>, Vec<f64>)], truth: &GroundTruth, aggs: &AggSpec) -> Result<(), String> {
    if out.len() != truth.len() {
        return Err(format!("{} groups, expected {}", out.len(), truth.len()));
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    for ((k, vals), (tk, &(count, sum))) in out.iter().zip(truth) {
        if k != tk {
            return Err(format!("unexpected key {:?}", String::from_utf8_lossy(k)));
        }
        for (f, &v) in aggs.functions().iter().zip(vals) {
            let want = match f {
                AggregateFunction::Sum => sum,
                AggregateFunction::Count => count as f64,
                _ => continue,
            };
            if v != want {
                return Err(format!("key {:?}: {f:?} is {v}, expected {want}", String::from_utf8_lossy(k)));
            }
        }
    }
    Ok(())
}
