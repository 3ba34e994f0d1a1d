use std::cmp::Ordering;
use std::collections::VecDeque;

use agg_core::{record, AggSpec, FrameAllocator, FrameKind, Metrics};

use crate::error::RunError;
use crate::group::Grouper;
use crate::loser::LoserTree;
use crate::run::{OrderKind, RunFile, RunReader, RunWriter};
use crate::spill::SpillDir;

/// How a set of runs is merged.
pub struct MergeOptions<'a> {
    /// Input runs per round; one more frame is used for the output.
    pub fan_in: usize,
    pub order: OrderKind,
    /// Fold equal keys while writing intermediate runs.
    pub combine_intermediate: bool,
    /// Sort prefix of a key (the slot id for slot-ordered runs, else 0).
    pub prefix: &'a dyn Fn(&[u8]) -> u64,
}

/// Number of runs merged in each round; the last entry is the final round.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MergeTrace {
    pub rounds: Vec<usize>,
}

impl MergeTrace {
    pub fn intermediate_rounds(&self) -> usize {
        self.rounds.len().saturating_sub(1)
    }
}

/// How many leading runs the next round merges, or `None` when all remaining
/// runs go into the final round.
pub fn plan_round(count: usize, fan_in: usize) -> Option<usize> {
    if count <= fan_in {
        None
    } else if count < 2 * fan_in {
        Some(count - fan_in + 1)
    } else {
        Some(fan_in)
    }
}

struct Stream {
    readers: Vec<RunReader>,
    prefix: Vec<u64>,
    live: Vec<bool>,
    tree: LoserTree,
    last_key: Vec<u8>,
    last_prefix: u64,
    started: bool,
}

fn beats(readers: &[RunReader], prefix: &[u64], live: &[bool], count: &mut u64, a: usize, b: usize) -> bool {
    if !live[a] {
        return false;
    }
    if !live[b] {
        return true;
    }
    *count += 1;
    let ka = record::key(readers[a].record());
    let kb = record::key(readers[b].record());
    match prefix[a].cmp(&prefix[b]).then_with(|| ka.cmp(kb)) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => a < b,
    }
}

impl Stream {
    fn open(
        runs: Vec<RunFile>,
        alloc: &FrameAllocator,
        prefix_of: &dyn Fn(&[u8]) -> u64,
        m: &mut Metrics,
    ) -> Result<Self, RunError> {
        let mut readers = Vec::with_capacity(runs.len());
        let mut prefix = Vec::with_capacity(runs.len());
        let mut live = Vec::with_capacity(runs.len());
        for run in runs {
            let mut r = RunReader::open(run, alloc.allocate()?)?;
            let ok = r.advance(m)?;
            prefix.push(if ok { prefix_of(record::key(r.record())) } else { 0 });
            live.push(ok);
            readers.push(r);
        }
        let mut count = 0;
        let tree = LoserTree::new(readers.len(), &mut |a, b| beats(&readers, &prefix, &live, &mut count, a, b));
        m.comparisons += count;
        Ok(Self { readers, prefix, live, tree, last_key: Vec::new(), last_prefix: 0, started: false })
    }

    fn drain(
        mut self,
        prefix_of: &dyn Fn(&[u8]) -> u64,
        m: &mut Metrics,
        mut sink: impl FnMut(FrameKind, usize, &[u8], &mut Metrics) -> Result<(), RunError>,
    ) -> Result<(), RunError> {
        loop {
            let w = self.tree.winner();
            if !self.live[w] {
                return Ok(());
            }
            {
                let r = &self.readers[w];
                let rec = r.record();
                if cfg!(debug_assertions) {
                    let key = record::key(rec);
                    if self.started && (self.last_prefix, &self.last_key[..]) > (self.prefix[w], key) {
                        return Err(RunError::OrderViolation);
                    }
                    self.started = true;
                    self.last_prefix = self.prefix[w];
                    self.last_key.clear();
                    self.last_key.extend_from_slice(key);
                }
                sink(r.kind(), r.fields(), rec, m)?;
            }
            let ok = self.readers[w].advance(m)?;
            self.live[w] = ok;
            if ok {
                self.prefix[w] = prefix_of(record::key(self.readers[w].record()));
            }
            let (readers, prefix, live) = (&self.readers, &self.prefix, &self.live);
            let mut count = 0;
            self.tree.replay(&mut |a, b| beats(readers, prefix, live, &mut count, a, b));
            m.comparisons += count;
        }
    }
}

/// Merges `runs` under `opts`, scheduling rounds by [`plan_round`], and
/// streams the grouped result of the final round into `emit`.
///
/// Frames held never exceed `fan_in + 1`; consumed runs are deleted as soon
/// as they are read.
pub fn merge_runs(
    runs: Vec<RunFile>,
    opts: &MergeOptions<'_>,
    aggs: &AggSpec,
    alloc: &FrameAllocator,
    dir: &SpillDir,
    m: &mut Metrics,
    emit: &mut dyn FnMut(&[u8], &[u8], &mut Metrics) -> Result<(), RunError>,
) -> Result<MergeTrace, RunError> {
    assert!(opts.fan_in >= 2, "merging needs at least two input frames");
    let mut queue: VecDeque<RunFile> = runs.into();
    let mut trace = MergeTrace::default();
    while let Some(take) = plan_round(queue.len(), opts.fan_in) {
        let batch: Vec<RunFile> = queue.drain(..take).collect();
        let level = batch.iter().map(|r| r.level).max().unwrap_or(0) + 1;
        let stream = Stream::open(batch, alloc, opts.prefix, m)?;
        let mut writer = RunWriter::create(dir, alloc.allocate()?, opts.order, level)?;
        if opts.combine_intermediate {
            let mut g = Grouper::new();
            let mut put = |k: &[u8], s: &[u8], m: &mut Metrics| writer.push_group(k, s, m);
            stream.drain(opts.prefix, m, |kind, _, rec, m| g.feed(aggs, kind, rec, m, &mut put))?;
            g.finish(m, &mut put)?;
        } else {
            stream.drain(opts.prefix, m, |kind, fields, rec, m| writer.push(kind, fields, rec, m))?;
        }
        trace.rounds.push(take);
        if let Some(run) = writer.finish(m)? {
            queue.push_back(run);
        }
    }
    if queue.is_empty() {
        return Ok(trace);
    }
    trace.rounds.push(queue.len());
    let stream = Stream::open(queue.into(), alloc, opts.prefix, m)?;
    let mut g = Grouper::new();
    stream.drain(opts.prefix, m, |kind, _, rec, m| g.feed(aggs, kind, rec, m, emit))?;
    g.finish(m, emit)?;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_examples() {
        assert_eq!(plan_round(3, 7), None);
        // five runs, four frames: three inputs per round
        assert_eq!(plan_round(5, 3), Some(3));
        assert_eq!(plan_round(3, 3), None);
        assert_eq!(plan_round(8, 3), Some(3));
    }
}
