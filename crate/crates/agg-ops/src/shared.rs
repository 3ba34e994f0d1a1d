use agg_core::{record, Frame, FrameKind};
use agg_hash::{ChainedHashTable, HashError, Insert};
use agg_run::OutputWriter;

use crate::driver::{emit_table, Ctx, Stage, Work, Writers};
use crate::error::OpsError;
use crate::plan::{split, HybridHashPlan, Partitioner};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Shared,
    /// Only partition 0 stays in the table.
    Resident,
    Spilled,
}

/// All partitions share one `M - 1` frame table until it first fills. Each
/// spilling partition then owns one private frame that becomes its output
/// buffer, and partition 0 keeps the rest until the table fills again.
pub(crate) struct SharedStage {
    table: Option<ChainedHashTable>,
    parts: Partitioner,
    writers: Writers,
    phase: Phase,
    seed: u64,
    p: usize,
    g_est: f64,
    r_res: f64,
    r_spill: f64,
    groups_seen: usize,
    level: u32,
}

impl SharedStage {
    pub fn new(cx: &mut Ctx, plan: &HybridHashPlan, g_est: f64, level: u32) -> Result<Self, OpsError> {
        let mut table = cx.table(cx.memory - 1, false, level, 1)?;
        let lists = table.list_cap();
        let p = plan.p.min(lists - 1);
        let (r_res, r_spill) = split(cx.memory, p);
        table.set_region_cap(0, lists - p);
        for _ in 0..p {
            table.add_region(1);
        }
        Ok(SharedStage {
            seed: table.seed(),
            table: Some(table),
            parts: Partitioner::new(p, r_res),
            writers: Writers::new(p + 1, level + 1),
            phase: if p == 0 { Phase::Resident } else { Phase::Shared },
            p,
            g_est,
            r_res,
            r_spill,
            groups_seen: 0,
            level,
        })
    }

    fn first_spill(&mut self, cx: &mut Ctx) -> Result<(), OpsError> {
        let t = self.table.as_mut().unwrap();
        for i in 1..=self.p {
            let w = t.spill_region(i, None, &cx.dir, self.level + 1, &mut cx.m)?;
            self.writers.set(i, w);
        }
        let reserve: Frame = cx.alloc.allocate()?;
        let parts = self.parts;
        let writers = &mut self.writers;
        let m = &mut cx.m;
        let sink = |h: u64, key: &[u8], state: &[u8]| -> Result<(), HashError> {
            Ok(writers.open_mut(parts.of(h)).push_group(key, state, m)?)
        };
        t.relocate(reserve, |h| (parts.of(h) == 0).then_some(0), sink)?;
        t.set_region_cap(0, usize::MAX);
        self.phase = Phase::Resident;
        Ok(())
    }

    fn second_spill(&mut self, cx: &mut Ctx) -> Result<(), OpsError> {
        let t = self.table.as_mut().unwrap();
        self.groups_seen = t.len();
        let w = t.spill_region(0, None, &cx.dir, self.level + 1, &mut cx.m)?;
        self.writers.set(0, w);
        self.table = None;
        self.phase = Phase::Spilled;
        Ok(())
    }
}

impl Stage for SharedStage {
    fn push(&mut self, cx: &mut Ctx, kind: FrameKind, fields: usize, rec: &[u8]) -> Result<(), OpsError> {
        let key = record::key(rec);
        let h = agg_hash::hash_key(key, self.seed);
        let part = self.parts.of(h);
        loop {
            let regions = [part, 0];
            let regions = match (self.phase, part) {
                (Phase::Shared, 0) => &regions[1..],
                (Phase::Shared, _) => &regions[..],
                (Phase::Resident, 0) => &regions[1..],
                _ => return self.writers.push(cx, part, kind, fields, rec),
            };
            let t = self.table.as_mut().unwrap();
            if t.insert_or_aggregate(h, 0, key, kind, record::fields(rec), regions, &mut cx.m)? != Insert::TableFull {
                return Ok(());
            }
            match self.phase {
                Phase::Shared => self.first_spill(cx)?,
                _ => self.second_spill(cx)?,
            }
        }
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
