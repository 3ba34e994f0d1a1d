use agg_run::plan_round;

use crate::error::OpsError;

/// Partitioning decision for one hybrid-hash pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridHashPlan {
    /// Spilling partitions; 0 means the input is expected to fit in memory.
    pub p: usize,
    pub fudge: f64,
    /// Share of the input routed to the resident partition.
    pub r_res: f64,
    /// Share routed to each spilling partition.
    pub r_spill: f64,
    /// Grace partitioning passes needed before hybrid hashing applies.
    pub grace_levels: u32,
}

impl HybridHashPlan {
    pub fn grace(&self) -> bool {
        self.grace_levels > 0
    }
}

/// Sizes the partitioning for an output of `g` frames with `m` frames of
/// memory and fudge factor `f`.
pub fn plan_hybrid(g: f64, m: usize, f: f64) -> Result<HybridHashPlan, OpsError> {
    if m < 4 {
        return Err(OpsError::InvalidBudget(m));
    }
    let gf = g * f;
    let mf = m as f64;
    let mut grace_levels = 0;
    let mut left = gf;
    while left >= mf * mf {
        grace_levels += 1;
        left /= (m - 1) as f64;
    }
    let p = if gf <= mf { 0 } else { (((gf - mf) / (mf - 2.0)).ceil() as usize).clamp(1, m - 2) };
    let (r_res, r_spill) = split(m, p);
    Ok(HybridHashPlan { p, fudge: f, r_res, r_spill, grace_levels })
}

/// Input shares of the resident and of each spilling partition.
pub fn split(m: usize, p: usize) -> (f64, f64) {
    if p == 0 {
        return (1.0, 0.0);
    }
    let res = (m - p) as f64;
    let r_res = res / (res + (m * p) as f64);
    (r_res, (1.0 - r_res) / p as f64)
}

/// Merge rounds an external sort of `r` frames needs with `m` frames: runs of
/// `m - 1` frames, merged `m - 1` at a time.
pub fn sort_levels(r: u64, m: usize) -> u32 {
    let fan_in = m - 1;
    let mut runs = (r as usize).div_ceil(fan_in);
    if runs <= 1 {
        return 0;
    }
    let mut rounds = 1;
    while let Some(take) = plan_round(runs, fan_in) {
        runs = runs - take + 1;
        rounds += 1;
    }
    rounds
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fallback {
    Recurse,
    FallbackHashSort,
}

/// Sends a spilled run to Hash-Sort when it kept more than 80% of its parent
/// or recursion went deeper than an external sort would.
pub fn fallback_controller(run_frames: u64, parent_frames: u64, level: u32, sort_levels: u32) -> Fallback {
    if run_frames as f64 > 0.8 * parent_frames as f64 || level > sort_levels.max(1) {
        Fallback::FallbackHashSort
    } else {
        Fallback::Recurse
    }
}

/// Maps a hash's high half onto partitions, giving partition 0 the share
/// `r_res` and splitting the rest evenly among `p` spilling partitions.
#[derive(Debug, Clone, Copy)]
pub struct Partitioner {
    p: u64,
    threshold: u64,
}

impl Partitioner {
    pub fn new(p: usize, r_res: f64) -> Self {
        let threshold = if p == 0 { 1u64 << 32 } else { (r_res.clamp(0.0, 1.0) * (1u64 << 32) as f64) as u64 };
        Partitioner { p: p as u64, threshold }
    }

    /// `n` equally sized partitions, none of them special.
    pub fn even(n: usize) -> Self {
        Partitioner { p: n as u64 - 1, threshold: (1u64 << 32) / n as u64 }
    }

    #[inline]
    pub fn of(&self, h: u64) -> usize {
        let hi = h >> 32;
        if hi < self.threshold {
            return 0;
        }
        (1 + ((hi - self.threshold) * self.p) / ((1u64 << 32) - self.threshold)) as usize
    }

    pub fn spilling(&self) -> usize {
        self.p as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_with_ceiling() {
        let plan = plan_hybrid(1200.0, 100, 1.0).unwrap();
        assert_eq!(plan.p, 12);
        assert!(!plan.grace());
        assert!((plan.r_res + 12.0 * plan.r_spill - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fits_in_memory() {
        let plan = plan_hybrid(50.0, 100, 1.2).unwrap();
        assert_eq!((plan.p, plan.r_res), (0, 1.0));
    }

    #[test]
    fn grace_trigger() {
        let plan = plan_hybrid(150.0, 10, 1.0).unwrap();
        assert_eq!(plan.grace_levels, 1);
        assert_eq!(plan_hybrid(99.0, 10, 1.0).unwrap().grace_levels, 0);
        assert_eq!(plan_hybrid(100.0 * 9.0, 10, 1.0).unwrap().grace_levels, 2);
        assert!(matches!(plan_hybrid(1.0, 3, 1.0), Err(OpsError::InvalidBudget(3))));
    }

    #[test]
    fn fallback_thresholds() {
        assert_eq!(fallback_controller(81, 100, 1, 2), Fallback::FallbackHashSort);
        assert_eq!(fallback_controller(50, 100, 1, 2), Fallback::Recurse);
        assert_eq!(fallback_controller(50, 100, 3, 2), Fallback::FallbackHashSort);
        assert_eq!(fallback_controller(50, 100, 1, 0), Fallback::Recurse);
    }

    #[test]
    fn sort_level_count() {
        // 100 frames, 10 frames of memory: 12 runs, 9-way merges
        assert_eq!(sort_levels(100, 10), 2);
        assert_eq!(sort_levels(9, 10), 0);
        assert_eq!(sort_levels(18, 10), 1);
    }

    #[test]
    fn partitioner_shares() {
        let p = Partitioner::new(3, 0.4);
        let mut counts = [0usize; 4];
        for i in 0..100_000u64 {
            counts[p.of(agg_hash::hash_key(&i.to_le_bytes(), 1))] += 1;
        }
        assert!((counts[0] as f64 / 1e5 - 0.4).abs() < 0.01);
        for c in &counts[1..] {
            assert!((*c as f64 / 1e5 - 0.2).abs() < 0.01);
        }
        let e = Partitioner::even(5);
        assert!((0..1000u64).all(|i| e.of(i << 40) < 5));
        assert_eq!(Partitioner::new(0, 1.0).of(u64::MAX), 0);
    }
}
