//! Three-way quicksort with comparison counting.
//!
//! Partitioning follows Dijkstra's scheme driven by a strict `less` predicate:
//! an element costs one comparison when it sorts below the pivot and two
//! otherwise. Pivots are the median of three randomly sampled positions.

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};

/// Sorts `v` by `less` and returns the number of `less` invocations.
pub fn quicksort_by<T, F>(v: &mut [T], seed: u64, mut less: F) -> u64
where
    T: Clone,
    F: FnMut(&T, &T) -> bool,
{
    let mut rng = SmallRng::seed_from_u64(seed);
    let mut count = 0u64;
    let mut stack = vec![(0usize, v.len())];
    while let Some((lo, hi)) = stack.pop() {
        if hi - lo < 2 {
            continue;
        }
        let p = pick_pivot(v, lo, hi, &mut rng, &mut less, &mut count);
        v.swap(lo, p);
        let pivot = v[lo].clone();
        let (mut lt, mut i, mut gt) = (lo, lo + 1, hi);
        while i < gt {
            count += 1;
            if less(&v[i], &pivot) {
                v.swap(lt, i);
                lt += 1;
                i += 1;
                continue;
            }
            count += 1;
            if less(&pivot, &v[i]) {
                gt -= 1;
                v.swap(i, gt);
            } else {
                i += 1;
            }
        }
        // Smaller side last so it is popped first and the stack stays shallow.
        if lt - lo < hi - gt {
            stack.push((gt, hi));
            stack.push((lo, lt));
        } else {
            stack.push((lo, lt));
            stack.push((gt, hi));
        }
    }
    count
}

fn pick_pivot<T, F>(v: &[T], lo: usize, hi: usize, rng: &mut SmallRng, less: &mut F, count: &mut u64) -> usize
where
    F: FnMut(&T, &T) -> bool,
{
    if hi - lo < 3 {
        return rng.gen_range(lo..hi);
    }
    let (mut a, mut b) = (rng.gen_range(lo..hi), rng.gen_range(lo..hi));
    let c = rng.gen_range(lo..hi);
    *count += 1;
    if less(&v[b], &v[a]) {
        std::mem::swap(&mut a, &mut b);
    }
    *count += 1;
    if !less(&v[c], &v[b]) {
        return b;
    }
    *count += 1;
    if less(&v[c], &v[a]) {
        a
    } else {
        c
    }
}
