use std::collections::VecDeque;

use agg_core::DatasetStats;
use agg_hash::bloom_false_positive;
use statrs::distribution::{ContinuousCDF, Normal};
use agg_ops::{destaging_partitions, fallback_controller, plan_hybrid, sort_levels, split, AlgorithmId, Fallback};

use crate::components::{c_sort, h_u, i_key, i_raw, merge_cost, probe_cost, solve_u, sum_range, Generator};
use crate::error::ModelError;
use crate::params::CostParameters;
use crate::report::CostReport;

/// Input of one pass: `groups` pre-aggregated records followed by `raw`
/// records, together covering `keys` distinct keys.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Input {
    raw: f64,
    groups: f64,
    keys: f64,
    frames: f64,
    g_est: f64,
}

impl Input {
    fn records(&self) -> f64 {
        self.raw + self.groups
    }

    /// The part routed to a partition owning share `s` of the hash space.
    fn share(&self, s: f64) -> Input {
        Input { raw: self.raw * s, groups: self.groups * s, keys: self.keys * s, frames: 0.0, g_est: self.g_est * s }
    }

    /// What is left after the first `s` records.
    fn rest(&self, s: f64) -> (f64, f64) {
        ((self.groups - s).max(0.0), (self.raw - (s - self.groups).max(0.0)).max(0.0))
    }
}

struct Job {
    mult: f64,
    input: Input,
    parent: f64,
    level: u32,
    tuned: bool,
}

struct Sim<'a> {
    p: &'a CostParameters,
    memory: usize,
    algorithm: AlgorithmId,
    /// Records per key of the original input.
    dup: f64,
    /// Generator keys per distinct key, `None` when every record is unique.
    gen_per_key: Option<f64>,
    rpf: f64,
    gpf: f64,
    levels: u32,
    rep: CostReport,
    queue: VecDeque<Job>,
    mult: f64,
    level: u32,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 { a } else { gcd(b, a % b) }
}

fn frames_for(count: f64, per_frame: f64) -> f64 {
    if count < 0.5 {
        0.0
    } else {
        (count / per_frame).ceil()
    }
}

/// Predicts comparisons and spill I/O of `algorithm` on a uniform input of
/// `stats.r_t` records and `stats.g_t` keys. `stats.g` is the output size
/// estimate handed to the hybrid-hash operators.
pub fn predict(algorithm: AlgorithmId, stats: &DatasetStats, p: &CostParameters) -> Result<CostReport, ModelError> {
    p.validate()?;
    let (n, m) = (stats.r_t, stats.g_t);
    if algorithm.is_hybrid() && p.memory < 4 {
        return Err(ModelError::InvalidBudget(p.memory));
    }
    let mut rep = CostReport::new(algorithm, p.memory);
    if n < 1.0 {
        return Ok(rep);
    }
    if !(m >= 1.0 && m <= n) {
        return Err(ModelError::Domain(format!("need 1 <= m <= n, got n={n} m={m}")));
    }
    let gen_per_key = match solve_u(n, m)? {
        Generator::Finite(u) => Some(u / m),
        Generator::Infinite => None,
    };
    let rpf = p.raw_per_frame();
    let frames = (n / rpf).ceil();
    rep.max_level = 0;
    let mut sim = Sim {
        p,
        memory: p.memory,
        algorithm,
        dup: n / m,
        gen_per_key,
        rpf,
        gpf: p.groups_per_frame(),
        levels: sort_levels(frames as u64, p.memory),
        rep,
        queue: VecDeque::new(),
        mult: 1.0,
        level: 0,
    };
    let input = Input { raw: n, groups: 0.0, keys: m, frames, g_est: stats.g };
    match algorithm {
        AlgorithmId::SortBased if p.sorted_input => sim.rep.add("scan", (n - 1.0).max(0.0), 0.0, 0.0),
        AlgorithmId::SortBased => sim.sort_pass(&input)?,
        AlgorithmId::HashSort => sim.hash_sort_pass(&input)?,
        _ => sim.hybrid_pass(&input)?,
    }
    while let Some(job) = sim.queue.pop_front() {
        sim.mult = job.mult;
        sim.level = job.level;
        sim.rep.max_level = sim.rep.max_level.max(job.level);
        sim.rep.add("recursion", 0.0, job.mult * job.input.frames, 0.0);
        if job.tuned {
            sim.original_pass(&Input { g_est: 0.0, ..job.input })?;
            continue;
        }
        match fallback_controller(job.input.frames as u64, job.parent as u64, job.level, sim.levels) {
            Fallback::FallbackHashSort => {
                sim.rep.fallbacks += job.mult;
                sim.hash_sort_pass(&job.input)?;
            }
            Fallback::Recurse => sim.hybrid_pass(&job.input)?,
        }
    }
    Ok(sim.rep)
}

impl Sim<'_> {
    fn add(&mut self, phase: &'static str, comparisons: f64, read: f64, written: f64) {
        let k = self.mult;
        self.rep.add(phase, k * comparisons, k * read, k * written);
    }

    /// Queues `count` identical runs produced by the current pass.
    fn spill(&mut self, phase: &'static str, count: f64, input: Input, parent: f64) {
        self.spill_job(phase, count, input, parent, false);
    }

    fn spill_job(&mut self, phase: &'static str, count: f64, input: Input, parent: f64, tuned: bool) {
        if count <= 0.0 || input.frames <= 0.0 {
            return;
        }
        self.add(phase, 0.0, 0.0, count * input.frames);
        self.queue.push_back(Job { mult: self.mult * count, input, parent, level: self.level + 1, tuned });
    }

    fn run_frames(&self, fixed: f64, groups: f64, raw: f64) -> f64 {
        fixed + frames_for(groups, self.gpf) + frames_for(raw, self.rpf)
    }

    /// Records per key for the keys of `x` not yet aggregated.
    fn unseen_dup(&self, x: &Input) -> f64 {
        let unseen = x.keys - x.groups;
        if unseen <= 0.0 {
            return 1.0;
        }
        self.dup.min(x.raw / unseen).max(1.0)
    }

    /// Distinct keys among the first `s` records of `x`.
    fn distinct_at(&self, x: &Input, s: f64) -> f64 {
        if s <= x.groups {
            return s;
        }
        let unseen = (x.keys - x.groups).max(0.0);
        if x.raw <= 0.0 || unseen <= 0.0 {
            return x.groups.min(x.keys);
        }
        let i = (s - x.groups).min(x.raw);
        x.groups + unseen * (1.0 - (1.0 - i / x.raw).max(0.0).powf(self.unseen_dup(x)))
    }

    /// Records of `x` consumed when `k` distinct keys have been seen, or
    /// `None` when `x` holds no more than `k` keys.
    fn position_of(&self, x: &Input, k: f64) -> Option<f64> {
        if x.keys <= k {
            return None;
        }
        if k <= x.groups {
            return Some(k);
        }
        let unseen = x.keys - x.groups;
        let frac = ((k - x.groups) / unseen).min(1.0);
        Some(x.groups + x.raw * (1.0 - (1.0 - frac).powf(1.0 / self.unseen_dup(x))))
    }

    fn hit(&self, x: &Input, k: f64) -> f64 {
        match self.gen_per_key {
            Some(r) => (k / (r * x.keys)).min(1.0),
            None => 0.0,
        }
    }

    /// Hash comparisons while records `[from, to)` of `x` go into a table
    /// with `h` slots that holds only keys of `x`.
    fn hash_span(&self, x: &Input, h: f64, from: f64, to: f64) -> f64 {
        let g_end = x.groups.min(to);
        let mut c = 0.0;
        if from < g_end {
            let (a, b) = (from.ceil(), g_end.ceil());
            c += (b * (b - 1.0) - a * (a - 1.0)) / (2.0 * h);
        }
        c + sum_range(from.max(x.groups), to, |s| {
            let k = self.distinct_at(x, s);
            probe_cost(k, h, self.hit(x, k))
        })
    }

    /// Comparisons of sorting each slot chain of a table holding `k` groups.
    fn slot_sort(k: f64, h: f64) -> f64 {
        let hu = h_u(k, h);
        if hu <= 0.0 {
            return 0.0;
        }
        hu * c_sort(k / hu, k / hu)
    }

    fn sort_pass(&mut self, x: &Input) -> Result<(), ModelError> {
        let n = x.records();
        let cap = (self.memory - 1) as f64 * self.rpf;
        if n <= cap {
            self.add("sort", c_sort(n, x.keys), 0.0, 0.0);
            return Ok(());
        }
        let full = (n / cap).floor();
        let last = n - full * cap;
        let mut runs = vec![(cap, (self.memory - 1) as f64); full as usize];
        let mut comps = full * c_sort(cap, i_key(cap, n, x.keys)?);
        if last >= 0.5 {
            runs.push((last, frames_for(last, self.rpf)));
            comps += c_sort(last, i_key(last, n, x.keys)?);
        }
        let written: f64 = runs.iter().map(|r| r.1).sum();
        self.add("sort", comps, 0.0, written);
        let rpf = self.rpf;
        let (mut read, mut comps) = (0.0, 0.0);
        let mc = merge_cost(runs, self.memory - 1, |rs| {
            let recs: f64 = rs.iter().map(|r| r.0).sum();
            read += rs.iter().map(|r| r.1).sum::<f64>();
            comps += recs * (rs.len() as f64).log2();
            let frames = frames_for(recs, rpf);
            ((recs, frames), frames)
        })?;
        self.add("merge", comps, read, mc.intermediate);
        Ok(())
    }

    fn hash_sort_pass(&mut self, x: &Input) -> Result<(), ModelError> {
        let lay = self.p.layout(self.memory - 1, false)?;
        let (k, h) = (lay.capacity as f64, lay.slots as f64);
        let n = x.records();
        let Some(s1) = self.position_of(x, k) else {
            self.add("hash", self.hash_span(x, h, 0.0, n), 0.0, 0.0);
            return Ok(());
        };
        let mut comps = self.hash_span(x, h, 0.0, s1) + Self::slot_sort(k, h);
        let run_frames = frames_for(k, self.gpf);
        // (groups, frames, records covered)
        let mut runs = vec![(k, run_frames, s1)];
        let fresh = Input { raw: n, groups: 0.0, keys: x.keys, frames: 0.0, g_est: 0.0 };
        let chunk = i_raw(k, n, x.keys)?;
        let rest = n - s1;
        let full = (rest / chunk).floor();
        let last = rest - full * chunk;
        comps += full * (self.hash_span(&fresh, h, 0.0, chunk) + Self::slot_sort(k, h));
        runs.extend(std::iter::repeat_n((k, run_frames, chunk), full as usize));
        if last >= 0.5 {
            let kl = i_key(last, n, x.keys)?;
            comps += self.hash_span(&fresh, h, 0.0, last) + Self::slot_sort(kl, h);
            runs.push((kl, frames_for(kl, self.gpf), last));
        }
        let written: f64 = runs.iter().map(|r| r.1).sum();
        self.add("hash", comps, 0.0, written);
        let (gpf, keys) = (self.gpf, x.keys);
        let (mut read, mut comps) = (0.0, 0.0);
        let mc = merge_cost(runs, self.memory - 1, |rs| {
            let groups: f64 = rs.iter().map(|r| r.0).sum();
            let covered = rs.iter().map(|r| r.2).sum::<f64>().min(n);
            read += rs.iter().map(|r| r.1).sum::<f64>();
            comps += groups * (rs.len() as f64).log2();
            let merged = i_key(covered, n, keys).unwrap_or(keys);
            let frames = frames_for(merged, gpf);
            ((merged, frames, covered), frames)
        })?;
        self.add("merge", comps, read, mc.intermediate);
        Ok(())
    }

    fn hybrid_pass(&mut self, x: &Input) -> Result<(), ModelError> {
        let plan = plan_hybrid(x.g_est, self.memory, self.p.planning_factor())?;
        if plan.grace() {
            return self.grace_pass(x);
        }
        match self.algorithm {
            AlgorithmId::OriginalHH => self.original_pass(x),
            AlgorithmId::SharedHH => self.shared_pass(x),
            AlgorithmId::DynamicDestaging => self.dynamic_pass(x),
            AlgorithmId::PrePartitioning => self.prepart_pass(x),
            a => Err(ModelError::Domain(format!("{a} is not a hybrid-hash algorithm"))),
        }
    }

    fn grace_pass(&mut self, x: &Input) -> Result<(), ModelError> {
        self.rep.grace_partitionings += self.mult;
        let n = (self.memory - 1) as f64;
        let mut c = x.share(1.0 / n);
        c.frames = self.run_frames(0.0, c.groups, c.raw);
        self.spill("grace", n, c, x.frames);
        Ok(())
    }

    /// Runs partition `x0` through a table of `k` groups and `h` slots from
    /// record `from` on; a full table is written out as `fixed` frames and
    /// the rest of the partition follows it into the same run.
    #[allow(clippy::too_many_arguments)]
    fn resident(&mut self, x0: &Input, k: f64, h: f64, from: f64, fixed: f64, g_est: f64, parent: f64) {
        match self.position_of(x0, k) {
            Some(s) => {
                let s = s.max(from);
                self.add("hash", self.hash_span(x0, h, from, s), 0.0, 0.0);
                let (rg, rr) = x0.rest(s);
                let run = Input {
                    raw: rr,
                    groups: k + rg,
                    keys: x0.keys,
                    frames: self.run_frames(fixed, rg, rr),
                    g_est: g_est.max(k / self.gpf),
                };
                self.spill("spill", 1.0, run, parent);
            }
            None => self.add("hash", self.hash_span(x0, h, from, x0.records()), 0.0, 0.0),
        }
    }

    fn spilled_share(&mut self, x: &Input, count: usize, share: f64) {
        let mut c = x.share(share);
        c.frames = self.run_frames(0.0, c.groups, c.raw);
        self.spill("spill", count as f64, c, x.frames);
    }

    fn original_pass(&mut self, x: &Input) -> Result<(), ModelError> {
        let plan = plan_hybrid(x.g_est, self.memory, self.p.planning_factor())?;
        let lay = self.p.layout(self.memory - plan.p, false)?;
        let x0 = x.share(plan.r_res);
        let (k, h) = (lay.capacity as f64, lay.slots as f64);
        self.resident(&x0, k, h, 0.0, lay.list_frames as f64, x0.g_est, x.frames);
        self.spilled_share(x, plan.p, plan.r_spill);
        Ok(())
    }

    fn shared_pass(&mut self, x: &Input) -> Result<(), ModelError> {
        let plan = plan_hybrid(x.g_est, self.memory, self.p.planning_factor())?;
        let lay = self.p.layout(self.memory - 1, false)?;
        let (l, epf, h) = (lay.list_frames, lay.entries_per_frame as f64, lay.slots as f64);
        let p = plan.p.min(l - 1);
        let (r_res, r_spill) = split(self.memory, p);
        let x0 = x.share(r_res);
        if p == 0 {
            self.resident(&x0, lay.capacity as f64, h, 0.0, l as f64, x0.g_est, x.frames);
            return Ok(());
        }
        let xi = x.share(r_spill);
        let usage = |s: f64| {
            self.distinct_at(&x0, r_res * s) + p as f64 * (self.distinct_at(&xi, r_spill * s) - epf).max(0.0)
        };
        let cap0 = (l - p) as f64 * epf;
        let n = x.records();
        if usage(n) <= cap0 {
            self.add("hash", self.hash_span(x, h, 0.0, n), 0.0, 0.0);
            return Ok(());
        }
        let (mut lo, mut hi) = (0.0, n);
        while hi - lo > 0.5 {
            let mid = 0.5 * (lo + hi);
            if usage(mid) < cap0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let s1 = hi;
        self.add("hash", self.hash_span(x, h, 0.0, s1), 0.0, 0.0);
        let gi = self.distinct_at(&xi, r_spill * s1);
        let (rg, rr) = xi.rest(r_spill * s1);
        let run = Input {
            raw: rr,
            groups: gi + rg,
            keys: xi.keys,
            frames: self.run_frames(1.0, (gi - epf).max(0.0) + rg, rr),
            g_est: xi.g_est,
        };
        self.spill("spill", p as f64, run, x.frames);
        let lists = (l - p + 1) as f64;
        self.resident(&x0, lists * epf, h, r_res * s1, lists, x0.g_est, x.frames);
        Ok(())
    }

    fn dynamic_pass(&mut self, x: &Input) -> Result<(), ModelError> {
        let plan = plan_hybrid(x.g_est, self.memory, self.p.planning_factor())?;
        let lay = self.p.layout(self.memory, false)?;
        let (l, epf) = (lay.list_frames, lay.entries_per_frame as f64);
        let p = destaging_partitions(plan.p, self.memory, l).min(lay.slots - 1);
        let q = p + 1;
        let xq = x.share(1.0 / q as f64);
        let hq = lay.slots as f64 / q as f64;
        // Partition sizes sit at evenly spaced binomial quantiles, assigned to
        // ids in a scrambled order. Every partition asks for a frame each time
        // its distinct keys cross a frame boundary; when none is left the
        // resident partition holding the most frames is written out.
        let sigma = (xq.keys * (1.0 - 1.0 / q as f64)).sqrt();
        let normal = Normal::new(0.0, 1.0).map_err(|e| ModelError::Domain(e.to_string()))?;
        let stride = (1..q).rev().find(|s| gcd(*s, q) == 1 && *s <= q * 5 / 8).unwrap_or(1);
        let parts: Vec<Input> = (0..q)
            .map(|i| {
                let z = normal.inverse_cdf(((i * stride) % q) as f64 / q as f64 + 0.5 / q as f64);
                xq.share(((xq.keys + sigma * z).max(1.0)) / xq.keys)
            })
            .collect();
        let mut events: Vec<(f64, usize)> = Vec::new();
        for (v, xv) in parts.iter().enumerate() {
            events.push((0.0, v));
            let mut f = 1.0;
            while xv.keys > f * epf {
                let t = self.position_of(xv, f * epf).map_or(1.0, |s| s / xv.records());
                events.push((t, v));
                f += 1.0;
            }
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut frames = vec![0usize; q];
        let mut resident = vec![true; q];
        let (mut cap, mut used) = (l, 0usize);
        let mut spills: Vec<(usize, f64, usize)> = Vec::new();
        for (t, v) in events {
            while resident[v] {
                if used < cap {
                    frames[v] += 1;
                    used += 1;
                    break;
                }
                let w = (0..q).filter(|&w| resident[w]).max_by_key(|&w| (frames[w], std::cmp::Reverse(w))).unwrap_or(v);
                resident[w] = false;
                used -= frames[w];
                cap -= 1;
                spills.push((w, t, frames[w]));
            }
        }
        spills.sort_by_key(|s| s.0);
        for xv in parts.iter().zip(&resident).filter(|(_, r)| **r).map(|(x, _)| x) {
            self.add("hash", self.hash_span(xv, hq, 0.0, xv.records()), 0.0, 0.0);
        }
        let k_mem = lay.capacity as f64;
        let g_est = x.g_est / q as f64;
        let mut batch: Option<Input> = None;
        for (v, t, fixed) in spills {
            let xv = &parts[v];
            let s = t * xv.records();
            let g = self.distinct_at(xv, s);
            self.add("hash", self.hash_span(xv, hq, 0.0, s), 0.0, 0.0);
            let (rg, rr) = xv.rest(s);
            let run = Input { raw: rr, groups: g + rg, keys: xv.keys, frames: self.run_frames(fixed as f64, rg, rr), g_est };
            if run.records() > k_mem {
                self.spill("spill", 1.0, run, x.frames);
                continue;
            }
            batch = match batch {
                Some(b) if b.records() + run.records() <= k_mem => Some(Input {
                    raw: b.raw + run.raw,
                    groups: b.groups + run.groups,
                    keys: b.keys + run.keys,
                    frames: b.frames + run.frames,
                    g_est,
                }),
                prev => {
                    if let Some(b) = prev {
                        self.spill_job("spill", 1.0, b, x.frames, true);
                    }
                    Some(run)
                }
            };
        }
        if let Some(b) = batch {
            self.spill_job("spill", 1.0, b, x.frames, true);
        }
        Ok(())
    }

    fn prepart_pass(&mut self, x: &Input) -> Result<(), ModelError> {
        let plan = plan_hybrid(x.g_est, self.memory, self.p.planning_factor())?;
        let pe = plan.p.max(1);
        let lay = self.p.layout(self.memory - pe, pe > 1)?;
        let (k, h) = (lay.capacity as f64, lay.slots as f64);
        let n = x.records();
        let Some(s1) = self.position_of(x, k) else {
            self.add("hash", self.hash_span(x, h, 0.0, n), 0.0, 0.0);
            return Ok(());
        };
        let resident_records = k * n / x.keys;
        let hits = (resident_records - s1).max(0.0);
        let misses = (n - resident_records).max(0.0);
        let hu = h_u(k, h);
        let per_hit = (k / hu + 1.0) / 2.0;
        let per_miss = if pe > 1 { self.bloom_miss(k / h) } else { k / h };
        let comps = self.hash_span(x, h, 0.0, s1) + hits * per_hit + misses * per_miss;
        self.add("hash", comps, 0.0, 0.0);
        let raw = misses / pe as f64;
        let run = Input {
            raw,
            groups: 0.0,
            keys: (x.keys - k) / pe as f64,
            frames: frames_for(raw, self.rpf),
            g_est: ((x.g_est - k / self.gpf) / pe as f64).max(1.0),
        };
        self.spill("spill", pe as f64, run, x.frames);
        Ok(())
    }

    /// Expected chain entries compared by an absent key when each slot's
    /// bloom byte filters probes; slot loads are Poisson with mean `load`.
    fn bloom_miss(&self, load: f64) -> f64 {
        if let Some(a) = self.p.bloom_alpha {
            return a * load;
        }
        let mut pj = (-load).exp();
        let mut total = 0.0;
        let top = (load + 12.0 * load.sqrt() + 20.0) as usize;
        for j in 1..=top {
            pj *= load / j as f64;
            total += pj * bloom_false_positive(j) * j as f64;
        }
        total
    }
}
