use agg_core::{record, FrameKind};
use agg_run::OutputWriter;

use crate::driver::{Ctx, Stage, Work, Writers};
use crate::error::OpsError;
use crate::plan::Partitioner;

/// Splits the input `M - 1` ways without aggregating.
pub(crate) struct GraceStage {
    parts: Partitioner,
    writers: Writers,
    seed: u64,
    g_est: f64,
    level: u32,
}

impl GraceStage {
    pub fn new(cx: &mut Ctx, g_est: f64, level: u32) -> Self {
        cx.m.grace_partitionings += 1;
        let n = cx.memory - 1;
        GraceStage { parts: Partitioner::even(n), writers: Writers::new(n, level + 1), seed: cx.seed_at(level), g_est, level }
    }
}

impl Stage for GraceStage {
    fn push(&mut self, cx: &mut Ctx, kind: FrameKind, fields: usize, rec: &[u8]) -> Result<(), OpsError> {
        let h = agg_hash::hash_key(record::key(rec), self.seed);
        self.writers.push(cx, self.parts.of(h), kind, fields, rec)
    }

    fn finish(self: Box<Self>, cx: &mut Ctx, _out: &mut OutputWriter<'_>) -> Result<Vec<Work>, OpsError> {
        let n = self.parts.spilling() + 1;
        let g = self.g_est / n as f64;
        let runs = self.writers.finish(&mut cx.m)?;
        Ok(runs.into_iter().map(|(_, run)| Work::new(run, g, self.level + 1)).collect())
    }
}
