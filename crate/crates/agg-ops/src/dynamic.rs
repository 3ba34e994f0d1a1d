use agg_core::{record, FrameKind};
use agg_hash::{ChainedHashTable, Insert, TableLayout};
use agg_run::OutputWriter;

use crate::driver::{emit_table, Ctx, Stage, Work, Writers};
use crate::error::OpsError;
use crate::plan::{HybridHashPlan, Partitioner};

/// Spill partition count: the planned count moved into 50-80% of memory and
/// limited so every partition can own a list frame.
pub fn destaging_partitions(p: usize, memory: usize, list_frames: usize) -> usize {
    if p == 0 {
        return 0;
    }
    let lo = memory.div_ceil(2);
    let hi = memory * 4 / 5;
    p.clamp(lo, hi.max(lo)).min(list_frames.saturating_sub(1))
}

/// Every partition grows its own frame list from one `M` frame table; when
/// memory runs out the largest resident partition is written out and keeps a
/// single output frame.
pub(crate) struct DynamicStage {
    table: ChainedHashTable,
    parts: Partitioner,
    resident: Vec<bool>,
    writers: Writers,
    seed: u64,
    g_est: f64,
    level: u32,
}

impl DynamicStage {
    pub fn new(cx: &mut Ctx, plan: &HybridHashPlan, g_est: f64, level: u32) -> Result<Self, OpsError> {
        let layout = TableLayout::compute(cx.memory, cx.frame_size, cx.group_bytes, cx.slot_ratio, false)?;
        let p = destaging_partitions(plan.p, cx.memory, layout.list_frames).min(layout.slots - 1);
        let mut table = cx.table(cx.memory, false, level, p + 1)?;
        for _ in 0..p {
            table.add_region(layout.list_frames);
        }
        Ok(DynamicStage {
            seed: table.seed(),
            table,
            parts: if p == 0 { Partitioner::new(0, 1.0) } else { Partitioner::even(p + 1) },
            resident: vec![true; p + 1],
            writers: Writers::new(p + 1, level + 1),
            g_est,
            level,
        })
    }

    /// Resident partition holding the most frames, lowest id on ties.
    fn victim(&self) -> Option<usize> {
        let mut best: Option<(usize, usize)> = None;
        for (q, _) in self.resident.iter().enumerate().filter(|(_, r)| **r) {
            let f = self.table.region_frames(q);
            if f > 0 && best.is_none_or(|(_, bf)| f > bf) {
                best = Some((q, f));
            }
        }
        best.map(|(q, _)| q)
    }
}

impl Stage for DynamicStage {
    fn push(&mut self, cx: &mut Ctx, kind: FrameKind, fields: usize, rec: &[u8]) -> Result<(), OpsError> {
        let key = record::key(rec);
        let h = agg_hash::hash_key(key, self.seed);
        let part = self.parts.of(h);
        while self.resident[part] {
            let r = self.table.insert_or_aggregate(h, part, key, kind, record::fields(rec), &[part], &mut cx.m)?;
            if r != Insert::TableFull {
                return Ok(());
            }
            let q = self.victim().ok_or(OpsError::InvalidBudget(cx.memory))?;
            let w = self.table.spill_region(q, Some(q), &cx.dir, self.level + 1, &mut cx.m)?;
            self.writers.set(q, w);
            self.resident[q] = false;
        }
        self.writers.push(cx, part, kind, fields, rec)
    }

    fn finish(self: Box<Self>, cx: &mut Ctx, out: &mut OutputWriter<'_>) -> Result<Vec<Work>, OpsError> {
        emit_table(&self.table, &mut cx.m, out)?;
        drop(self.table);
        let runs = self.writers.finish(&mut cx.m)?;
        let share = self.g_est / self.resident.len() as f64;
        let k = TableLayout::compute(cx.memory, cx.frame_size, cx.group_bytes, cx.slot_ratio, false)?.capacity as u64;
        let mut works: Vec<Work> = Vec::new();
        let mut batch: Option<(Work, u64)> = None;
        for (_, run) in runs {
            if run.records > k {
                works.push(Work::new(run, share, self.level + 1));
                continue;
            }
            match &mut batch {
                Some((w, n)) if *n + run.records <= k => {
                    *n += run.records;
                    w.runs.push(run);
                }
                _ => {
                    let n = run.records;
                    let mut w = Work::new(run, share, self.level + 1);
                    w.tuned = true;
                    works.extend(batch.replace((w, n)).map(|(w, _)| w));
                }
            }
        }
        works.extend(batch.map(|(w, _)| w));
        Ok(works)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::tests::ctx;
    use crate::plan::plan_hybrid;

    #[test]
    fn partition_count_clamped() {
        assert_eq!(destaging_partitions(0, 100, 90), 0);
        assert_eq!(destaging_partitions(12, 100, 90), 50);
        assert_eq!(destaging_partitions(95, 100, 90), 80);
        assert_eq!(destaging_partitions(95, 100, 40), 39);
        assert_eq!(destaging_partitions(1, 5, 3), 2);
    }

    #[test]
    fn ties_spill_lowest_partition() {
        let mut cx = ctx(10, 4096);
        let plan = plan_hybrid(30.0, 10, 1.0).unwrap();
        let mut st = DynamicStage::new(&mut cx, &plan, 30.0, 0).unwrap();
        let n = st.resident.len();
        assert!(n > 3);
        let mut rec = Vec::new();
        let mut seen = vec![false; n];
        for i in 0..10_000u64 {
            let k = format!("{i:015x}");
            let part = st.parts.of(agg_hash::hash_key(k.as_bytes(), st.seed));
            if (part == 2 || part == 3) && !seen[part] {
                seen[part] = true;
                rec.clear();
                agg_core::record::encode(k.as_bytes(), &1.0f64.to_le_bytes(), &mut rec);
                st.push(&mut cx, FrameKind::Raw, 1, &rec).unwrap();
            }
        }
        assert_eq!((st.table.region_frames(2), st.table.region_frames(3)), (1, 1));
        assert_eq!(st.victim(), Some(2));
    }
}
