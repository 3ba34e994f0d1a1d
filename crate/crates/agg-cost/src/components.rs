use crate::error::{domain, ModelError};

fn check_dataset(n: f64, m: f64) -> Result<(), ModelError> {
    domain(n.is_finite() && m.is_finite(), || "sizes must be finite".into())?;
    domain(m > 0.0 && m <= n, || format!("need 0 < m <= n, got n={n} m={m}"))
}

/// Expected distinct keys among `r` records drawn without replacement from
/// `n` records over `m` equally frequent keys.
pub fn i_key(r: f64, n: f64, m: f64) -> Result<f64, ModelError> {
    check_dataset(n, m)?;
    domain((0.0..=n).contains(&r), || format!("r={r} outside [0, {n}]"))?;
    Ok(m * (1.0 - (1.0 - r / n).powf(n / m)))
}

/// Expected records drawn before `k` distinct keys have been seen; the
/// inverse of [`i_key`].
pub fn i_raw(k: f64, n: f64, m: f64) -> Result<f64, ModelError> {
    check_dataset(n, m)?;
    domain((0.0..=m).contains(&k), || format!("k={k} outside [0, {m}]"))?;
    Ok(n * (1.0 - (1.0 - k / m).powf(m / n)))
}

/// Expected comparisons of a 3-way quicksort over `n` records holding `m`
/// distinct keys.
pub fn c_sort(n: f64, m: f64) -> f64 {
    if n <= 1.0 {
        return 0.0;
    }
    let m = m.clamp(1.0, n);
    if m <= 3.0 {
        return (n - 1.0) * m;
    }
    2.0 * (n / m) * (m - 1.0) * (m - 2.0).ln() + (n / m - 1.0) * (2.0 * m - 3.0)
}

/// Size of the key generator set behind a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Generator {
    Finite(f64),
    /// Every record carries a fresh key.
    Infinite,
}

impl Generator {
    /// Chance that a key already drawn `k` times over is drawn again.
    pub fn hit(&self, k: f64) -> f64 {
        match *self {
            Generator::Finite(u) => (k / u).min(1.0),
            Generator::Infinite => 0.0,
        }
    }
}

fn occupancy(u: f64, n: f64) -> f64 {
    u * -(n * (-1.0 / u).ln_1p()).exp_m1()
}

/// Solves `m = U(1 - (1 - 1/U)^n)` for `U`.
pub fn solve_u(n: f64, m: f64) -> Result<Generator, ModelError> {
    check_dataset(n, m)?;
    if m >= n {
        return Ok(Generator::Infinite);
    }
    if m <= 1.0 {
        return Ok(Generator::Finite(1.0));
    }
    let (mut lo, mut hi) = (m, 2.0 * m);
    while occupancy(hi, n) < m {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(ModelError::NoRoot("generator size"));
        }
    }
    while (hi - lo) > 1e-6 * lo {
        let mid = 0.5 * (lo + hi);
        if occupancy(mid, n) < m {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Generator::Finite(0.5 * (lo + hi)))
}

/// Expected non-empty slots after `k` keys are hashed into `h` slots.
pub fn h_u(k: f64, h: f64) -> f64 {
    if k <= 0.0 {
        return 0.0;
    }
    h * -(k * (-1.0 / h).ln_1p()).exp_m1()
}

/// Expected comparisons of one probe into a table holding `k` keys over `h`
/// slots when the probed key is present with probability `hit`.
pub(crate) fn probe_cost(k: f64, h: f64, hit: f64) -> f64 {
    if k <= 0.0 {
        return 0.0;
    }
    let hu = h_u(k, h);
    let l = k / hu;
    hit * (l + 1.0) / 2.0 + (1.0 - hit) * l * hu / h
}

/// Sums `f(s)` over the integers in `[a, b)`, sampling at most 4096
/// points. A fractional tail counts its term in proportion.
pub(crate) fn sum_range(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let a = a.max(0.0).ceil();
    if b <= a {
        return 0.0;
    }
    let steps = (b - a).ceil() as u64;
    const LIMIT: u64 = 4096;
    if steps <= LIMIT {
        let whole = (b - a).floor();
        let tail = (b - a) - whole;
        return (0..whole as u64).map(|i| f(a + i as f64)).sum::<f64>() + tail * f(a + whole);
    }
    let width = (b - a) / LIMIT as f64;
    (0..LIMIT).map(|j| f(a + (j as f64 + 0.5) * width) * width).sum()
}

/// Expected key comparisons while records of `D(n, m)` are inserted into a
/// chained table with `k` group entries and `h` slots, up to the record that
/// finds the table full (or the end of the input).
pub fn c_hash(n: f64, m: f64, k: f64, h: f64) -> Result<f64, ModelError> {
    domain(k > 0.0 && h >= 1.0, || format!("table needs k > 0 and h >= 1, got k={k} h={h}"))?;
    let gen = solve_u(n, m)?;
    let upper = if k < m { i_raw(k, n, m)? } else { n };
    Ok(sum_range(0.0, upper, |i| {
        let k = i_key(i.min(n), n, m).unwrap_or(m);
        probe_cost(k, h, gen.hit(k))
    }))
}

/// Comparisons spent inserting `u` keys known to be distinct.
pub fn c_unique(u: f64, h: f64) -> f64 {
    u * (u - 1.0).max(0.0) / (2.0 * h)
}

/// [`c_hash`] for an input that starts with `u` already aggregated groups and
/// continues with `n` raw records over `m` keys.
pub fn c_hash_mixed(n: f64, m: f64, k: f64, h: f64, u: f64) -> Result<f64, ModelError> {
    if u <= 0.0 {
        return c_hash(n, m, k, h);
    }
    domain(k > 0.0 && h >= 1.0, || format!("table needs k > 0 and h >= 1, got k={k} h={h}"))?;
    let first = c_unique(u.min(k), h);
    if u >= k || n <= 0.0 {
        return Ok(first);
    }
    let gen = solve_u(n, m)?;
    let upper = if k - u < m { i_raw(k - u, n, m)? } else { n };
    Ok(first
        + sum_range(0.0, upper, |i| {
            let k = i_key(i.min(n), n, m).unwrap_or(m) + u;
            probe_cost(k, h, gen.hit(k))
        }))
}

/// Outcome of a simulated multi-round merge.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MergeCost {
    /// Runs merged per round, the final round last.
    pub rounds: Vec<usize>,
    pub intermediate: f64,
    pub last: f64,
}

impl MergeCost {
    pub fn total(&self) -> f64 {
        self.intermediate + self.last
    }
}

/// Merges `runs` at most `fan_in` at a time, merging just enough leading runs
/// in the first round that the remainder merges in full rounds. `merge`
/// returns the merged run and the cost charged for producing it.
pub fn merge_cost<T>(
    mut runs: Vec<T>,
    fan_in: usize,
    mut merge: impl FnMut(&[T]) -> (T, f64),
) -> Result<MergeCost, ModelError> {
    if fan_in < 2 {
        return Err(ModelError::InvalidBudget(fan_in + 1));
    }
    let mut out = MergeCost::default();
    if runs.is_empty() {
        return Ok(out);
    }
    while runs.len() > fan_in {
        let take = if runs.len() < 2 * fan_in { runs.len() - fan_in + 1 } else { fan_in };
        let (merged, cost) = merge(&runs[..take]);
        runs.drain(..take);
        runs.push(merged);
        out.rounds.push(take);
        out.intermediate += cost;
    }
    out.rounds.push(runs.len());
    out.last = merge(&runs).1;
    Ok(out)
}
