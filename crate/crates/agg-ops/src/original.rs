use agg_core::{record, FrameKind};
use agg_hash::{ChainedHashTable, Insert};
use agg_run::OutputWriter;

use crate::driver::{emit_table, Ctx, Stage, Work, Writers};
use crate::error::OpsError;
use crate::plan::{plan_hybrid, Partitioner};

/// Partition 0 aggregates in an `M - P` frame table, the others stream to
/// one output frame each. A full table turns partition 0 into a spilled run.
pub(crate) struct OriginalStage {
    table: Option<ChainedHashTable>,
    parts: Partitioner,
    writers: Writers,
    seed: u64,
    g_est: f64,
    r_res: f64,
    r_spill: f64,
    groups_seen: usize,
    level: u32,
}

impl OriginalStage {
    pub fn boxed(cx: &mut Ctx, g_est: f64, level: u32) -> Result<Box<dyn Stage>, OpsError> {
        let plan = plan_hybrid(g_est, cx.memory, cx.fudge)?;
        let table = cx.table(cx.memory - plan.p, false, level, 1)?;
        Ok(Box::new(OriginalStage {
            seed: table.seed(),
            table: Some(table),
            parts: Partitioner::new(plan.p, plan.r_res),
            writers: Writers::new(plan.p + 1, level + 1),
            g_est,
            r_res: plan.r_res,
            r_spill: plan.r_spill,
            groups_seen: 0,
            level,
        }))
    }
}

impl Stage for OriginalStage {
    fn push(&mut self, cx: &mut Ctx, kind: FrameKind, fields: usize, rec: &[u8]) -> Result<(), OpsError> {
        let key = record::key(rec);
        let h = agg_hash::hash_key(key, self.seed);
        let part = self.parts.of(h);
        if part == 0 {
            if let Some(t) = self.table.as_mut() {
                let r = t.insert_or_aggregate(h, 0, key, kind, record::fields(rec), &[0], &mut cx.m)?;
                if r != Insert::TableFull {
                    return Ok(());
                }
                self.groups_seen = t.len();
                let w = t.spill_region(0, None, &cx.dir, self.level + 1, &mut cx.m)?;
                self.writers.set(0, w);
                self.table = None;
            }
        }
        self.writers.push(cx, part, kind, fields, rec)
    }

    fn finish(self: Box<Self>, cx: &mut Ctx, out: &mut OutputWriter<'_>) -> Result<Vec<Work>, OpsError> {
        if let Some(t) = &self.table {
            emit_table(t, &mut cx.m, out)?;
        }
        drop(self.table);
        let seen = self.groups_seen as f64 / cx.groups_per_frame();
        let runs = self.writers.finish(&mut cx.m)?;
        Ok(runs
            .into_iter()
            .map(|(i, run)| {
                let g = if i == 0 { (self.r_res * self.g_est).max(seen) } else { self.r_spill * self.g_est };
                Work::new(run, g, self.level + 1)
            })
            .collect())
    }
}
