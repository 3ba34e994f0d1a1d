use std::collections::{HashSet, VecDeque};
use std::time::Instant;

use agg_core::{AggSpec, Frame, FrameAllocator, FrameKind, Metrics};
use agg_hash::{ChainedHashTable, TableLayout, SLOT_BYTES};
use agg_run::{Grouper, OrderKind, OutputWriter, RunFile, RunReader, RunWriter, SpillDir};

use crate::config::OperatorConfig;
use crate::error::OpsError;
use crate::plan::{fallback_controller, plan_hybrid, sort_levels, Fallback};
use crate::select::AlgorithmId;
use crate::{dynamic, grace, hash_sort, original, prepart, shared, sort_based};

/// Residency bookkeeping of one Pre-Partitioning pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditEntry {
    pub level: u32,
    pub resident_keys: u64,
    pub spilled_keys: u64,
    /// Resident keys that also appear in a spill file of the same pass.
    pub overlap: u64,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub metrics: Metrics,
    pub high_water: usize,
    pub audit: Vec<AuditEntry>,
}

pub(crate) struct Ctx {
    pub alloc: FrameAllocator,
    pub dir: SpillDir,
    pub m: Metrics,
    pub aggs: AggSpec,
    pub memory: usize,
    pub frame_size: usize,
    pub slot_ratio: f64,
    /// F, already scaled by the table overhead.
    pub fudge: f64,
    pub group_bytes: usize,
    pub seed: u64,
    pub audit: Option<Vec<AuditEntry>>,
}

pub(crate) fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Ctx {
    /// Hash seed of a recursion level.
    pub fn seed_at(&self, level: u32) -> u64 {
        splitmix(self.seed ^ (level as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93))
    }

    pub fn table(&self, frames: usize, bloom: bool, level: u32, parts: usize) -> Result<ChainedHashTable, OpsError> {
        let layout = TableLayout::compute(frames, self.frame_size, self.group_bytes, self.slot_ratio, bloom)?;
        Ok(ChainedHashTable::new(&self.alloc, layout, self.aggs.clone(), self.seed_at(level), parts)?)
    }

    /// Group records per frame, for converting counts into frame estimates.
    pub fn groups_per_frame(&self) -> f64 {
        ((self.frame_size - agg_core::FRAME_HEADER) / self.group_bytes) as f64
    }
}

/// Spilled runs waiting to be aggregated by a later pass.
#[derive(Debug)]
pub(crate) struct Work {
    pub runs: Vec<RunFile>,
    /// Estimated output size in frames.
    pub g_est: f64,
    pub parent_frames: u64,
    pub level: u32,
    /// Known to fit one in-memory table.
    pub tuned: bool,
}

impl Work {
    pub fn new(run: RunFile, g_est: f64, level: u32) -> Self {
        Work { runs: vec![run], g_est, parent_frames: 0, level, tuned: false }
    }

    fn frames(&self) -> u64 {
        self.runs.iter().map(|r| r.frames).sum()
    }
}

pub(crate) trait Stage {
    fn push(&mut self, cx: &mut Ctx, kind: FrameKind, fields: usize, rec: &[u8]) -> Result<(), OpsError>;

    /// Emits what this pass aggregated and returns the runs still to process.
    fn finish(self: Box<Self>, cx: &mut Ctx, out: &mut OutputWriter<'_>) -> Result<Vec<Work>, OpsError>;
}

/// Lazily opened spill writers, one per partition.
pub(crate) struct Writers {
    level: u32,
    slots: Vec<Option<RunWriter>>,
}

impl Writers {
    pub fn new(n: usize, level: u32) -> Self {
        Writers { level, slots: (0..n).map(|_| None).collect() }
    }

    pub fn set(&mut self, i: usize, w: RunWriter) {
        self.slots[i] = Some(w);
    }

    /// A writer already opened with [`Writers::set`] or a push.
    pub fn open_mut(&mut self, i: usize) -> &mut RunWriter {
        self.slots[i].as_mut().expect("writer is open")
    }

    fn get(&mut self, cx: &Ctx, i: usize) -> Result<&mut RunWriter, OpsError> {
        let level = self.level;
        Ok(match &mut self.slots[i] {
            Some(w) => w,
            slot @ None => slot.insert(RunWriter::create(&cx.dir, cx.alloc.allocate()?, OrderKind::Unsorted, level)?),
        })
    }

    pub fn push(&mut self, cx: &mut Ctx, i: usize, kind: FrameKind, fields: usize, rec: &[u8]) -> Result<(), OpsError> {
        self.get(cx, i)?.push(kind, fields, rec, &mut cx.m)?;
        Ok(())
    }

    /// Closes every writer and returns the non-empty runs by partition.
    pub fn finish(self, m: &mut Metrics) -> Result<Vec<(usize, RunFile)>, OpsError> {
        let mut runs = Vec::new();
        for (i, w) in self.slots.into_iter().enumerate() {
            if let Some(w) = w {
                if let Some(run) = w.finish(m)? {
                    runs.push((i, run));
                }
            }
        }
        Ok(runs)
    }
}

/// Emits every group held by `table`.
pub(crate) fn emit_table(table: &ChainedHashTable, m: &mut Metrics, out: &mut OutputWriter<'_>) -> Result<(), OpsError> {
    table.for_each_group(|k, s| out.emit(k, s, m))?;
    Ok(())
}

/// Collects a table's keys when auditing.
pub(crate) fn resident_keys(cx: &Ctx, table: &ChainedHashTable) -> Option<HashSet<Vec<u8>>> {
    cx.audit.as_ref()?;
    let mut keys = HashSet::new();
    table.for_each_group(|k, _| {
        keys.insert(k.to_vec());
        Ok::<_, ()>(())
    })
    .ok()?;
    Some(keys)
}

pub(crate) fn record_audit(cx: &mut Ctx, level: u32, resident: HashSet<Vec<u8>>, runs: &[(usize, RunFile)]) -> Result<(), OpsError> {
    let mut spilled = HashSet::new();
    for (_, run) in runs {
        agg_run::scan_run(run, cx.frame_size, |_, rec| {
            spilled.insert(agg_core::record::key(rec).to_vec());
        })?;
    }
    let overlap = spilled.iter().filter(|k| resident.contains(*k)).count() as u64;
    if let Some(a) = cx.audit.as_mut() {
        a.push(AuditEntry { level, resident_keys: resident.len() as u64, spilled_keys: spilled.len() as u64, overlap });
    }
    Ok(())
}

/// Running aggregation over input already in key order.
struct SortedScan {
    grouper: Grouper,
    last: Vec<u8>,
    started: bool,
}

impl SortedScan {
    fn push(&mut self, cx: &mut Ctx, kind: FrameKind, rec: &[u8], out: &mut OutputWriter<'_>) -> Result<(), OpsError> {
        let key = agg_core::record::key(rec);
        if self.started {
            cx.m.comparisons += 1;
            if key < self.last.as_slice() {
                return Err(OpsError::Unsorted);
            }
        }
        self.started = true;
        self.last.clear();
        self.last.extend_from_slice(key);
        self.grouper.feed(&cx.aggs, kind, rec, &mut cx.m, &mut |k, s, m| out.emit(k, s, m))?;
        Ok(())
    }
}

/// An aggregation operator: frames are pushed in and groups come out, on
/// close or, for a sorted scan, as soon as each group is complete.
pub struct Operator {
    cx: Ctx,
    algorithm: AlgorithmId,
    stage: Box<dyn Stage>,
    scan: Option<SortedScan>,
    out_frame: Option<Frame>,
    start: Instant,
    input_frames: u64,
}

impl Operator {
    pub fn open(cfg: OperatorConfig) -> Result<Self, OpsError> {
        let start = Instant::now();
        let min = if cfg.algorithm.is_hybrid() { 4 } else { 3 };
        if cfg.memory < min {
            return Err(OpsError::InvalidBudget(cfg.memory));
        }
        if !(cfg.fudge >= 1.0) {
            return Err(OpsError::Config(format!("fudge factor {} is below 1", cfg.fudge)));
        }
        let group_bytes = cfg.group_bytes();
        let overhead = (SLOT_BYTES as f64 * cfg.slot_ratio + agg_hash::LINK_BYTES as f64 + group_bytes as f64)
            / group_bytes as f64;
        let dir = match &cfg.spill_parent {
            Some(p) => SpillDir::within(p)?,
            None => SpillDir::new()?,
        };
        let mut cx = Ctx {
            alloc: FrameAllocator::new(cfg.memory, cfg.frame_size),
            dir,
            m: Metrics::default(),
            aggs: cfg.aggs.clone(),
            memory: cfg.memory,
            frame_size: cfg.frame_size,
            slot_ratio: cfg.slot_ratio,
            fudge: overhead * cfg.fudge,
            group_bytes,
            seed: cfg.seed,
            audit: cfg.audit.then(Vec::new),
        };
        let stage: Box<dyn Stage> = match cfg.algorithm {
            AlgorithmId::SortBased => Box::new(sort_based::SortStage::new(&cx, 0)),
            AlgorithmId::HashSort => Box::new(hash_sort::HashSortStage::new(&cx, 0)?),
            a => {
                let stats = cfg
                    .estimate
                    .ok_or_else(|| OpsError::Config(format!("{a} needs an output size estimate")))?;
                hybrid_stage(&mut cx, a, stats.g, 0)?
            }
        };
        let scan = (cfg.sorted_input && cfg.algorithm == AlgorithmId::SortBased)
            .then(|| SortedScan { grouper: Grouper::new(), last: Vec::new(), started: false });
        let out_frame = Some(Frame::new(cx.frame_size));
        Ok(Operator { cx, algorithm: cfg.algorithm, stage, scan, out_frame, start, input_frames: 0 })
    }

    /// Consumes one input frame. Groups finished by a sorted scan go to
    /// `on_group` right away; other operators emit nothing before close.
    pub fn push_frame(&mut self, frame: &Frame, on_group: &mut dyn FnMut(&[u8], &[u8])) -> Result<(), OpsError> {
        self.cx.m.input_read();
        self.input_frames += 1;
        let (kind, fields) = (frame.kind(), frame.fields());
        let Some(scan) = self.scan.as_mut() else {
            for rec in frame.records() {
                self.stage.push(&mut self.cx, kind, fields, rec)?;
            }
            return Ok(());
        };
        let buf = self.out_frame.take().unwrap_or_else(|| Frame::new(self.cx.frame_size));
        let mut out = OutputWriter::new(buf, self.start, on_group);
        let res = frame.records().try_for_each(|rec| scan.push(&mut self.cx, kind, rec, &mut out));
        self.out_frame = Some(out.into_frame());
        res
    }

    /// Finishes every pass, streaming final groups into `on_group`.
    pub fn close(self, on_group: &mut dyn FnMut(&[u8], &[u8])) -> Result<Report, OpsError> {
        let Operator { mut cx, algorithm, stage, scan, out_frame, start, input_frames } = self;
        let buf = out_frame.unwrap_or_else(|| Frame::new(cx.frame_size));
        let mut out = OutputWriter::new(buf, start, on_group);
        if let Some(mut scan) = scan {
            scan.grouper.finish(&mut cx.m, &mut |k, s, m| out.emit(k, s, m))?;
        }
        let levels = sort_levels(input_frames, cx.memory);
        let mut queue: VecDeque<Work> = VecDeque::new();
        let mut parent = input_frames;
        let mut stage = stage;
        loop {
            for mut w in stage.finish(&mut cx, &mut out)? {
                w.parent_frames = parent;
                queue.push_back(w);
            }
            let Some(w) = queue.pop_front() else { break };
            cx.m.max_level = cx.m.max_level.max(w.level);
            parent = w.frames();
            stage = if w.tuned {
                original::OriginalStage::boxed(&mut cx, 0.0, w.level)?
            } else {
                match fallback_controller(parent, w.parent_frames, w.level, levels) {
                    Fallback::FallbackHashSort => {
                        cx.m.fallbacks += 1;
                        Box::new(hash_sort::HashSortStage::new(&cx, w.level)?)
                    }
                    Fallback::Recurse => hybrid_stage(&mut cx, algorithm, w.g_est, w.level)?,
                }
            };
            for run in w.runs {
                let mut r = RunReader::open(run, Frame::new(cx.frame_size))?;
                while r.advance(&mut cx.m)? {
                    stage.push(&mut cx, r.kind(), r.fields(), r.record())?;
                }
            }
        }
        out.finish(&mut cx.m);
        cx.m.total_time = start.elapsed();
        Ok(Report { metrics: cx.m, high_water: cx.alloc.high_water(), audit: cx.audit.unwrap_or_default() })
    }
}

fn hybrid_stage(cx: &mut Ctx, algorithm: AlgorithmId, g_est: f64, level: u32) -> Result<Box<dyn Stage>, OpsError> {
    let plan = plan_hybrid(g_est, cx.memory, cx.fudge)?;
    if plan.grace() {
        return Ok(Box::new(grace::GraceStage::new(cx, g_est, level)));
    }
    Ok(match algorithm {
        AlgorithmId::OriginalHH => original::OriginalStage::boxed(cx, g_est, level)?,
        AlgorithmId::SharedHH => Box::new(shared::SharedStage::new(cx, &plan, g_est, level)?),
        AlgorithmId::DynamicDestaging => Box::new(dynamic::DynamicStage::new(cx, &plan, g_est, level)?),
        AlgorithmId::PrePartitioning => Box::new(prepart::PrePartStage::new(cx, &plan, g_est, level)?),
        a => unreachable!("{a} is not a hybrid-hash operator"),
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::plan::Partitioner;

    pub fn ctx(memory: usize, frame_size: usize) -> Ctx {
        Ctx {
            alloc: FrameAllocator::new(memory, frame_size),
            dir: SpillDir::new().unwrap(),
            m: Metrics::default(),
            aggs: AggSpec::sum(),
            memory,
            frame_size,
            slot_ratio: 1.0,
            fudge: 1.2 * 1.64,
            group_bytes: 25,
            seed: 77,
            audit: None,
        }
    }

    #[test]
    fn next_level_repartitions_evenly() {
        let cx = ctx(8, 1024);
        let parts = Partitioner::even(8);
        let keys: Vec<String> = (0..200_000)
            .map(|i| format!("{i:015x}"))
            .filter(|k| parts.of(agg_hash::hash_key(k.as_bytes(), cx.seed_at(0))) == 3)
            .collect();
        let mut counts = [0usize; 8];
        for k in &keys {
            counts[parts.of(agg_hash::hash_key(k.as_bytes(), cx.seed_at(1)))] += 1;
        }
        let max = *counts.iter().max().unwrap() as f64;
        assert!(max / keys.len() as f64 <= 0.95);
        assert!(counts.iter().all(|&c| (c as f64 - keys.len() as f64 / 8.0).abs() < 0.1 * keys.len() as f64));
    }
}
