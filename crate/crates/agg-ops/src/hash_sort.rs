use agg_core::{Frame, FrameKind, Metrics};
use agg_hash::{hash_key, ChainedHashTable, Insert};
use agg_run::{merge_runs, MergeOptions, OrderKind, OutputWriter, RunFile};

use crate::driver::{emit_table, Ctx, Stage, Work};
use crate::error::OpsError;

/// Aggregates into an `M - 1` frame table, flushing it in (slot, key) order
/// whenever it fills, and merges the flushed runs.
pub(crate) struct HashSortStage {
    table: ChainedHashTable,
    runs: Vec<RunFile>,
    writer_frame: Option<Frame>,
    level: u32,
}

impl HashSortStage {
    pub fn new(cx: &Ctx, level: u32) -> Result<Self, OpsError> {
        if cx.memory < 3 {
            return Err(OpsError::InvalidBudget(cx.memory));
        }
        let table = cx.table(cx.memory - 1, false, level, 1)?;
        Ok(HashSortStage { table, runs: Vec::new(), writer_frame: None, level })
    }

    fn flush(&mut self, cx: &mut Ctx) -> Result<(), OpsError> {
        let frame = match self.writer_frame.take() {
            Some(f) => f,
            None => cx.alloc.allocate()?,
        };
        let (run, frame) = self.table.sort_slots_and_flush(&cx.dir, frame, self.level + 1, &mut cx.m)?;
        self.runs.extend(run);
        self.writer_frame = Some(frame);
        Ok(())
    }
}

impl Stage for HashSortStage {
    fn push(&mut self, cx: &mut Ctx, kind: FrameKind, _fields: usize, rec: &[u8]) -> Result<(), OpsError> {
        let key = agg_core::record::key(rec);
        let fields = agg_core::record::fields(rec);
        let h = self.table.hash(key);
        if self.table.insert_or_aggregate(h, 0, key, kind, fields, &[0], &mut cx.m)? == Insert::TableFull {
            self.flush(cx)?;
            if self.table.insert_or_aggregate(h, 0, key, kind, fields, &[0], &mut cx.m)? == Insert::TableFull {
                return Err(OpsError::Config("a single group does not fit the hash table".into()));
            }
        }
        Ok(())
    }

    fn finish(mut self: Box<Self>, cx: &mut Ctx, out: &mut OutputWriter<'_>) -> Result<Vec<Work>, OpsError> {
        if self.runs.is_empty() {
            emit_table(&self.table, &mut cx.m, out)?;
            return Ok(Vec::new());
        }
        if !self.table.is_empty() {
            self.flush(cx)?;
        }
        let HashSortStage { table, runs, writer_frame, .. } = *self;
        let (seed, slots) = (table.seed(), table.layout().slots);
        drop(table);
        drop(writer_frame);
        let prefix = move |k: &[u8]| agg_hash::hash::slot_of(hash_key(k, seed), slots) as u64;
        let opts = MergeOptions {
            fan_in: cx.memory - 1,
            order: OrderKind::BySlotThenKey,
            combine_intermediate: true,
            prefix: &prefix,
        };
        let mut emit = |k: &[u8], s: &[u8], m: &mut Metrics| out.emit(k, s, m);
        merge_runs(runs, &opts, &cx.aggs, &cx.alloc, &cx.dir, &mut cx.m, &mut emit)?;
        Ok(Vec::new())
    }
}
