use agg_core::{record, FrameKind};
use agg_hash::{ChainedHashTable, Insert, Probe};
use agg_run::OutputWriter;

use crate::driver::{emit_table, record_audit, resident_keys, Ctx, Stage, Work, Writers};
use crate::error::OpsError;
use crate::plan::{HybridHashPlan, Partitioner};

/// Fills an `M - P` frame table with whatever arrives first. Once it is full
/// only records of resident groups are aggregated; everything else goes to
/// `P` spill partitions, so resident groups never reach a run.
pub(crate) struct PrePartStage {
    table: ChainedHashTable,
    parts: Partitioner,
    writers: Writers,
    full: bool,
    seed: u64,
    g_est: f64,
    level: u32,
}

impl PrePartStage {
    pub fn new(cx: &mut Ctx, plan: &HybridHashPlan, g_est: f64, level: u32) -> Result<Self, OpsError> {
        let p = plan.p.max(1);
        let table = cx.table(cx.memory - p, p > 1, level, 1)?;
        Ok(PrePartStage {
            seed: table.seed(),
            table,
            parts: Partitioner::even(p),
            writers: Writers::new(p, level + 1),
            full: false,
            g_est,
            level,
        })
    }
}

impl Stage for PrePartStage {
    fn push(&mut self, cx: &mut Ctx, kind: FrameKind, fields: usize, rec: &[u8]) -> Result<(), OpsError> {
        let key = record::key(rec);
        let h = agg_hash::hash_key(key, self.seed);
        let state = record::fields(rec);
        if !self.full {
            if self.table.insert_or_aggregate(h, 0, key, kind, state, &[0], &mut cx.m)? != Insert::TableFull {
                return Ok(());
            }
            self.full = true;
            return self.writers.push(cx, self.parts.of(h), kind, fields, rec);
        }
        if self.table.aggregate_if_present(h, 0, key, kind, state, &mut cx.m) == Probe::Found {
            return Ok(());
        }
        self.writers.push(cx, self.parts.of(h), kind, fields, rec)
    }

    fn finish(self: Box<Self>, cx: &mut Ctx, out: &mut OutputWriter<'_>) -> Result<Vec<Work>, OpsError> {
        emit_table(&self.table, &mut cx.m, out)?;
        let resident = resident_keys(cx, &self.table);
        let kept = self.table.len() as f64 / cx.groups_per_frame();
        drop(self.table);
        let runs = self.writers.finish(&mut cx.m)?;
        if let Some(keys) = resident {
            record_audit(cx, self.level, keys, &runs)?;
        }
        let p = self.parts.spilling() + 1;
        let g = ((self.g_est - kept) / p as f64).max(1.0);
        Ok(runs.into_iter().map(|(_, run)| Work::new(run, g, self.level + 1)).collect())
    }
}
