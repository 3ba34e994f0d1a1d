use agg_core::sort::quicksort_by;
use agg_core::{record, Frame, FrameKind};
use agg_run::{merge_runs, Grouper, MergeOptions, OrderKind, OutputWriter, RunFile, RunWriter};

use crate::driver::{Ctx, Stage, Work};
use crate::error::OpsError;

/// Sorts memory loads of `M - 1` frames into runs, then merges them with the
/// grouping pipelined into the final round.
pub(crate) struct SortStage {
    load: Vec<Frame>,
    runs: Vec<RunFile>,
    writer_frame: Option<Frame>,
    cur: usize,
    level: u32,
    seed: u64,
    loads: u64,
}

impl SortStage {
    pub fn new(cx: &Ctx, level: u32) -> Self {
        SortStage { load: Vec::new(), runs: Vec::new(), writer_frame: None, cur: 0, level, seed: cx.seed_at(level), loads: 0 }
    }

    /// Pointers to every loaded record, sorted by key.
    fn sorted(&mut self, cx: &mut Ctx) -> Vec<(u32, u32)> {
        let mut ptrs = Vec::new();
        for (fi, f) in self.load.iter().enumerate() {
            let mut off = agg_core::FRAME_HEADER;
            for rec in f.records() {
                ptrs.push((fi as u32, off as u32));
                off += rec.len();
            }
        }
        self.loads += 1;
        let load = &self.load;
        let key = |&(f, o): &(u32, u32)| {
            let rec = &load[f as usize].bytes()[o as usize..];
            record::key(rec)
        };
        cx.m.comparisons += quicksort_by(&mut ptrs, self.seed ^ self.loads, |a, b| key(a) < key(b));
        ptrs
    }

    fn record(&self, (f, o): (u32, u32)) -> (FrameKind, usize, &[u8]) {
        let frame = &self.load[f as usize];
        let rest = &frame.bytes()[o as usize..];
        let len = record::record_len(rest, frame.fields());
        (frame.kind(), frame.fields(), &rest[..len])
    }

    fn spill(&mut self, cx: &mut Ctx) -> Result<(), OpsError> {
        let ptrs = self.sorted(cx);
        let frame = match self.writer_frame.take() {
            Some(f) => f,
            None => cx.alloc.allocate()?,
        };
        let mut w = RunWriter::create(&cx.dir, frame, OrderKind::ByKey, self.level + 1)?;
        for p in ptrs {
            let (kind, fields, rec) = self.record(p);
            w.push(kind, fields, rec, &mut cx.m)?;
        }
        let (run, frame) = w.finish_keep(&mut cx.m)?;
        self.runs.extend(run);
        self.writer_frame = Some(frame);
        for f in &mut self.load {
            f.reset(FrameKind::Raw, 1);
        }
        Ok(())
    }
}

impl Stage for SortStage {
    fn push(&mut self, cx: &mut Ctx, kind: FrameKind, fields: usize, rec: &[u8]) -> Result<(), OpsError> {
        let fits = |f: &Frame| f.is_empty() || f.accepts(kind, fields) && f.free() >= rec.len();
        if !self.load.get(self.cur).is_some_and(fits) {
            if self.cur + 1 < self.load.len() {
                self.cur += 1;
            } else if self.load.len() < cx.memory - 1 {
                self.load.push(cx.alloc.allocate()?);
                self.cur = self.load.len() - 1;
            } else {
                self.spill(cx)?;
                self.cur = 0;
            }
        }
        let f = &mut self.load[self.cur];
        if f.is_empty() {
            f.reset(kind, fields);
        }
        f.push_encoded(rec)?;
        Ok(())
    }

    fn finish(mut self: Box<Self>, cx: &mut Ctx, out: &mut OutputWriter<'_>) -> Result<Vec<Work>, OpsError> {
        let mut emit = |k: &[u8], s: &[u8], m: &mut agg_core::Metrics| out.emit(k, s, m);
        if self.runs.is_empty() {
            let ptrs = self.sorted(cx);
            let mut g = Grouper::new();
            for p in ptrs {
                let (kind, _, rec) = self.record(p);
                g.feed(&cx.aggs, kind, rec, &mut cx.m, &mut emit)?;
            }
            g.finish(&mut cx.m, &mut emit)?;
            return Ok(Vec::new());
        }
        if self.load.iter().any(|f| !f.is_empty()) {
            self.spill(cx)?;
        }
        let SortStage { load, runs, writer_frame, .. } = *self;
        drop(load);
        drop(writer_frame);
        let opts = MergeOptions {
            fan_in: cx.memory - 1,
            order: OrderKind::ByKey,
            combine_intermediate: false,
            prefix: &|_| 0,
        };
        merge_runs(runs, &opts, &cx.aggs, &cx.alloc, &cx.dir, &mut cx.m, &mut emit)?;
        Ok(Vec::new())
    }
}
