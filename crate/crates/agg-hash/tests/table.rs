use std::collections::{BTreeMap, HashMap, HashSet};

use agg_core::{AggSpec, FrameAllocator, FrameKind, Metrics};
use agg_hash::hash::slot_of;
use agg_hash::{bloom_false_positive, ChainedHashTable, HashError, Insert, Probe, TableLayout};
use agg_run::{scan_run, OrderKind, SpillDir};
use proptest::prelude::*;
use rand::{rngs::StdRng, Rng, SeedableRng};

const P: usize = 4096;

fn table(alloc: &FrameAllocator, layout: TableLayout, seed: u64) -> ChainedHashTable {
    ChainedHashTable::new(alloc, layout, AggSpec::sum(), seed, 1).unwrap()
}

fn put(t: &mut ChainedHashTable, key: &[u8], v: f64, m: &mut Metrics) -> Insert {
    let h = t.hash(key);
    t.insert_or_aggregate(h, 0, key, FrameKind::Raw, &v.to_le_bytes(), &[0], m).unwrap()
}

fn contents(t: &ChainedHashTable) -> BTreeMap<Vec<u8>, f64> {
    let mut out = BTreeMap::new();
    t.for_each_group(|k, s| {
        assert!(out.insert(k.to_vec(), f64::from_le_bytes(s.try_into().unwrap())).is_none());
        Ok::<_, ()>(())
    })
    .unwrap();
    out
}

/// A layout with exactly `slots` slots and room for at least `groups` groups.
fn sized(slots: usize, groups: usize, bloom: bool) -> TableLayout {
    let mut l = TableLayout::compute(2, P, 25, 1.0, bloom).unwrap();
    l.slots = slots;
    l.slot_frames = slots.div_ceil(P / l.slot_bytes);
    l.list_frames = groups.div_ceil(l.entries_per_frame);
    l.capacity = l.list_frames * l.entries_per_frame;
    l.frames = l.slot_frames + l.list_frames;
    l
}

fn key(i: u64) -> Vec<u8> {
    format!("{:015x}", i).into_bytes()
}

#[test]
fn same_key_twice_aggregates() {
    let alloc = FrameAllocator::new(4, P);
    let mut t = table(&alloc, TableLayout::compute(4, P, 25, 1.0, false).unwrap(), 1);
    let mut m = Metrics::default();
    assert_eq!(put(&mut t, b"a", 1.0, &mut m), Insert::Inserted);
    assert_eq!(put(&mut t, b"a", 2.0, &mut m), Insert::Aggregated);
    assert_eq!(contents(&t), BTreeMap::from([(b"a".to_vec(), 3.0)]));
}

#[test]
fn capacity_two_rejects_third_key() {
    // one-byte keys: 2 + 1 + 8 group bytes, 8 link bytes, two per list frame
    let p = 8 + 2 * 19;
    let layout = TableLayout::compute(2, p, 11, 1.0, false).unwrap();
    assert_eq!(layout.capacity, 2);
    let alloc = FrameAllocator::new(2, p);
    let mut t = table(&alloc, layout, 3);
    let mut m = Metrics::default();
    assert_eq!(put(&mut t, b"a", 1.0, &mut m), Insert::Inserted);
    assert_eq!(put(&mut t, b"b", 1.0, &mut m), Insert::Inserted);
    assert_eq!(put(&mut t, b"c", 1.0, &mut m), Insert::TableFull);
    assert_eq!(put(&mut t, b"a", 1.0, &mut m), Insert::Aggregated);
    assert!(alloc.high_water() <= 2);
}

fn urn(h: f64, k: f64) -> f64 {
    h * (1.0 - (1.0 - 1.0 / h).powf(k))
}

#[test]
fn thousand_keys_thousand_slots() {
    let layout = sized(1000, 1000, false);
    let alloc = FrameAllocator::new(layout.frames, P);
    let mut t = table(&alloc, layout, 17);
    let mut m = Metrics::default();
    let mut rng = StdRng::seed_from_u64(5);
    let keys: HashSet<u64> = std::iter::repeat_with(|| rng.gen()).take(1000).collect();
    for k in &keys {
        put(&mut t, &key(*k), 1.0, &mut m);
    }
    assert_eq!(t.len(), 1000);
    let want = urn(1000.0, 1000.0);
    assert!((want - 632.3).abs() < 0.1);
    let got = t.occupied_slots() as f64;
    assert!((got - want).abs() / want < 0.03, "{got} vs {want}");
}

#[test]
fn occupied_slots_track_urn_model() {
    for &(h, checkpoints) in &[(1000usize, &[100usize, 500, 1000, 3000][..]), (4096, &[1000, 4096, 8000][..])] {
        let mut sums = vec![0.0; checkpoints.len()];
        let seeds = 20;
        for seed in 0..seeds {
            let last = *checkpoints.last().unwrap();
            let layout = sized(h, last, false);
            let alloc = FrameAllocator::new(layout.frames, P);
            let mut t = table(&alloc, layout, seed);
            let mut m = Metrics::default();
            let mut c = 0;
            for i in 0..last as u64 {
                put(&mut t, &key(i.wrapping_mul(0x9E37_79B9) ^ seed), 1.0, &mut m);
                if i as usize + 1 == checkpoints[c] {
                    sums[c] += t.occupied_slots() as f64;
                    c += 1;
                }
            }
        }
        for (c, &k) in checkpoints.iter().enumerate() {
            let mean = sums[c] / seeds as f64;
            let want = urn(h as f64, k as f64);
            assert!((mean - want).abs() / want < 0.05, "H={h} k={k}: {mean} vs {want}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_shadow_map(ops in prop::collection::vec((0u64..300, 1u32..100), 1..2000), bloom: bool, ratio in 1usize..4) {
        let layout = TableLayout::compute(8, 1024, 25, ratio as f64, bloom).unwrap();
        let alloc = FrameAllocator::new(8, 1024);
        let mut t = table(&alloc, layout, 99);
        let mut m = Metrics::default();
        let mut shadow: BTreeMap<Vec<u8>, f64> = BTreeMap::new();
        for (k, v) in ops {
            let k = key(k);
            match put(&mut t, &k, v as f64, &mut m) {
                Insert::TableFull => prop_assert!(!shadow.contains_key(&k)),
                _ => *shadow.entry(k).or_default() += v as f64,
            }
        }
        prop_assert_eq!(contents(&t), shadow.clone());
        for k in shadow.keys() {
            let h = t.hash(k);
            prop_assert_eq!(t.membership_probe(h, 0, k, &mut m), Probe::Found);
        }
        prop_assert!(t.occupied_slots() <= shadow.len().min(layout.slots));
        prop_assert!(alloc.high_water() <= 8);
    }

    #[test]
    fn bloom_never_denies_stored_keys(keys in prop::collection::hash_set(any::<u64>(), 1..3000), seed: u64) {
        let layout = TableLayout::compute(6, 2048, 25, 1.0, true).unwrap();
        let alloc = FrameAllocator::new(6, 2048);
        let mut t = table(&alloc, layout, seed);
        let mut m = Metrics::default();
        let mut stored = vec![];
        for k in keys {
            let k = key(k);
            if put(&mut t, &k, 1.0, &mut m) == Insert::Inserted {
                stored.push(k);
            }
        }
        for k in &stored {
            let h = t.hash(k);
            prop_assert_eq!(t.membership_probe(h, 0, k, &mut m), Probe::Found);
        }
    }
}

fn fill(t: &mut ChainedHashTable, m: &mut Metrics) -> Vec<Vec<u8>> {
    let mut stored = vec![];
    for i in 0.. {
        let k = key(i);
        if put(t, &k, 1.0, m) == Insert::TableFull {
            break;
        }
        stored.push(k);
    }
    stored
}

#[test]
fn bloom_false_positive_rate_near_closed_form() {
    for ratio in [1.0, 2.0] {
        let layout = TableLayout::compute(40, P, 25, ratio, true).unwrap();
        let alloc = FrameAllocator::new(40, P);
        let mut t = table(&alloc, layout, 7);
        let mut m = Metrics::default();
        let stored = fill(&mut t, &mut m);
        assert_eq!(stored.len(), layout.capacity);
        let loads = t.slot_loads();
        let predicted = loads.iter().map(|&j| bloom_false_positive(j)).sum::<f64>() / loads.len() as f64;
        let probes = 100_000u64;
        let mut passed = 0;
        for i in 0..probes {
            let k = format!("absent-{i}").into_bytes();
            let h = t.hash(&k);
            match t.membership_probe(h, 0, &k, &mut m) {
                Probe::DefinitelyAbsent => {}
                Probe::Absent => passed += 1,
                Probe::Found => panic!("absent key reported present"),
            }
        }
        let measured = passed as f64 / probes as f64;
        assert!(measured < 2.0 * predicted && measured > predicted / 2.0, "ratio {ratio}: {measured} vs {predicted}");
    }
}

#[test]
fn definitely_absent_costs_no_comparisons() {
    let layout = TableLayout::compute(4, P, 25, 1.0, true).unwrap();
    let alloc = FrameAllocator::new(4, P);
    let mut t = table(&alloc, layout, 8);
    let mut m = Metrics::default();
    fill(&mut t, &mut m);
    let mut skipped = 0;
    for i in 0..1000 {
        let k = format!("zz{i}").into_bytes();
        let before = m.comparisons;
        let h = t.hash(&k);
        if t.membership_probe(h, 0, &k, &mut m) == Probe::DefinitelyAbsent {
            assert_eq!(m.comparisons, before);
            skipped += 1;
        }
    }
    assert!(skipped > 0);
    assert_eq!(m.bloom_skips, skipped);
}

#[test]
fn fresh_key_on_empty_slot_is_definitely_absent() {
    let layout = sized(1000, 10, true);
    let alloc = FrameAllocator::new(layout.frames, P);
    let mut t = table(&alloc, layout, 2);
    let mut m = Metrics::default();
    put(&mut t, b"present", 1.0, &mut m);
    let used = t.slot(t.hash(b"present"), 0);
    let fresh = (0..).map(key).find(|k| t.slot(t.hash(k), 0) != used).unwrap();
    let h = t.hash(&fresh);
    assert_eq!(t.membership_probe(h, 0, &fresh, &mut m), Probe::DefinitelyAbsent);
}

fn run_contents(run: &agg_run::RunFile, p: usize) -> Vec<(Vec<u8>, f64)> {
    let mut out = vec![];
    scan_run(run, p, |kind, rec| {
        assert_eq!(kind, FrameKind::Group);
        out.push((agg_core::record::key(rec).to_vec(), agg_core::record::payload(rec)));
    })
    .unwrap();
    out
}

#[test]
fn flush_orders_by_slot_then_key() {
    let layout = sized(10, 10, false);
    let alloc = FrameAllocator::new(layout.frames + 1, P);
    let mut t = table(&alloc, layout, 4);
    let slot = |k: &[u8]| slot_of(agg_hash::hash_key(k, 4), 10);
    let mut by_slot: HashMap<usize, Vec<Vec<u8>>> = HashMap::new();
    for i in 0..200u32 {
        let k = format!("k{i}").into_bytes();
        by_slot.entry(slot(&k)).or_default().push(k);
    }
    let (s3, s7) = (&by_slot[&3], &by_slot[&7]);
    let (a, b, c) = ((&s3[0]).min(&s3[1]).clone(), (&s3[0]).max(&s3[1]).clone(), s7[0].clone());
    let mut m = Metrics::default();
    for k in [&b, &c, &a] {
        put(&mut t, k, 1.0, &mut m);
    }
    let dir = SpillDir::new().unwrap();
    let (run, _frame) = t.sort_slots_and_flush(&dir, alloc.allocate().unwrap(), 0, &mut m).unwrap();
    let run = run.unwrap();
    assert_eq!(run.order, OrderKind::BySlotThenKey);
    let keys: Vec<_> = run_contents(&run, P).into_iter().map(|r| r.0).collect();
    assert_eq!(keys, vec![a, b, c]);
    assert!(t.is_empty());
}

#[test]
fn empty_flush_creates_no_file() {
    let alloc = FrameAllocator::new(3, P);
    let mut t = table(&alloc, TableLayout::compute(2, P, 25, 1.0, false).unwrap(), 4);
    let dir = SpillDir::new().unwrap();
    let (run, _) = t.sort_slots_and_flush(&dir, alloc.allocate().unwrap(), 0, &mut Metrics::default()).unwrap();
    assert!(run.is_none());
    assert_eq!(dir.live_files(), 0);
}

#[test]
fn ten_thousand_groups_flush_sorted() {
    let layout = TableLayout::compute(120, P, 25, 1.0, false).unwrap();
    assert!(layout.capacity >= 10_000);
    let alloc = FrameAllocator::new(121, P);
    let mut t = table(&alloc, layout, 12);
    let mut m = Metrics::default();
    let mut rng = StdRng::seed_from_u64(12);
    let mut n = 0;
    while n < 10_000 {
        match put(&mut t, &key(rng.gen::<u32>() as u64), 1.0, &mut m) {
            Insert::Inserted => n += 1,
            Insert::Aggregated => {}
            Insert::TableFull => panic!("table full at {n}"),
        }
    }
    let before = m.comparisons;
    let dir = SpillDir::new().unwrap();
    let (run, _) = t.sort_slots_and_flush(&dir, alloc.allocate().unwrap(), 0, &mut m).unwrap();
    assert!(m.comparisons > before);
    let rows = run_contents(&run.unwrap(), P);
    assert_eq!(rows.len(), 10_000);
    let order: Vec<_> = rows.iter().map(|(k, _)| (slot_of(agg_hash::hash_key(k, 12), layout.slots), k)).collect();
    assert!(order.windows(2).all(|w| w[0] < w[1]));
    assert!(alloc.high_water() <= 121);
}

#[test]
fn spill_region_writes_only_that_region() {
    let layout = TableLayout::compute(8, 1024, 25, 1.0, false).unwrap();
    let alloc = FrameAllocator::new(8, 1024);
    let mut t = ChainedHashTable::new(&alloc, layout, AggSpec::sum(), 5, 1).unwrap();
    let r1 = t.add_region(2);
    let mut m = Metrics::default();
    let mut shadow = [BTreeMap::new(), BTreeMap::new()];
    for i in 0..120u64 {
        let k = key(i % 70);
        let r = (i % 70 % 2) as usize;
        let h = t.hash(&k);
        let out = t.insert_or_aggregate(h, 0, &k, FrameKind::Raw, &1.0f64.to_le_bytes(), &[[0, r1][r]], &mut m).unwrap();
        assert_ne!(out, Insert::TableFull);
        *shadow[r].entry(k).or_insert(0.0) += 1.0;
    }
    let held = alloc.outstanding();
    let dir = SpillDir::new().unwrap();
    let w = t.spill_region(r1, None, &dir, 1, &mut m).unwrap();
    assert!(alloc.outstanding() <= held);
    let run = w.finish(&mut m).unwrap().unwrap();
    let spilled: BTreeMap<_, _> = run_contents(&run, 1024).into_iter().collect();
    assert_eq!(spilled, shadow[1]);
    assert_eq!(contents(&t), shadow[0]);
    for k in shadow[0].keys() {
        let h = t.hash(k);
        assert_eq!(t.membership_probe(h, 0, k, &mut m), Probe::Found);
    }
    for k in shadow[1].keys() {
        let h = t.hash(k);
        assert_eq!(t.membership_probe(h, 0, k, &mut m), Probe::Absent);
    }
    let again = t.spill_region(r1, None, &dir, 1, &mut m).unwrap();
    assert!(again.finish(&mut m).unwrap().is_none());
    assert!(alloc.high_water() <= 8);
}

fn part_of(h: u64, parts: u64) -> u64 {
    ((h >> 32) * parts) >> 32
}

#[test]
fn rehash_into_keeps_selected_groups() {
    for keep_any in [true, false] {
        let layout = TableLayout::compute(6, 1024, 25, 1.0, false).unwrap();
        let alloc = FrameAllocator::new(12, 1024);
        let mut src = table(&alloc, layout, 1);
        let mut dst = table(&alloc, layout, 2);
        let mut m = Metrics::default();
        let stored = fill(&mut src, &mut m);
        let mut spilled = BTreeMap::new();
        src.rehash_into(
            &mut dst,
            |h| (keep_any && part_of(h, 3) == 0).then_some(0),
            |_, k, s| {
                spilled.insert(k.to_vec(), f64::from_le_bytes(s.try_into().unwrap()));
                Ok(())
            },
            &mut m,
        )
        .unwrap();
        let kept = contents(&dst);
        assert_eq!(kept.len() + spilled.len(), stored.len());
        assert!(kept.keys().all(|k| part_of(agg_hash::hash_key(k, 1), 3) == 0));
        assert!(spilled.keys().all(|k| !keep_any || part_of(agg_hash::hash_key(k, 1), 3) != 0));
        if !keep_any {
            assert!(dst.is_empty());
        }
        assert!(src.is_empty());
    }
}

#[test]
fn rehash_into_small_destination_errors() {
    let alloc = FrameAllocator::new(12, 1024);
    let mut src = table(&alloc, TableLayout::compute(6, 1024, 25, 1.0, false).unwrap(), 1);
    let mut dst = table(&alloc, TableLayout::compute(2, 1024, 25, 1.0, false).unwrap(), 2);
    let mut m = Metrics::default();
    fill(&mut src, &mut m);
    let r = src.rehash_into(&mut dst, |_| Some(0), |_, _, _| Ok(()), &mut m);
    assert!(matches!(r, Err(HashError::CapacityExceeded)));
}

/// Shared table with three spilling partitions, each owning a private
/// one-frame region and overflowing into the shared one. At the first
/// overflow the private frames become run writers, partition-0 groups are
/// packed into recycled frames and the rest is spilled.
#[test]
fn shared_first_spill_stays_within_budget() {
    let budget = 12;
    let parts = 4u64;
    let alloc = FrameAllocator::new(budget, 1024);
    let layout = TableLayout::compute(budget - 1, 1024, 25, 1.0, false).unwrap();
    let mut t = table(&alloc, layout, 31);
    let private: Vec<_> = (1..parts).map(|_| t.add_region(1)).collect();
    t.set_region_cap(0, layout.list_frames - private.len());
    let reserve = alloc.allocate().unwrap();
    let mut m = Metrics::default();
    let mut shadow: BTreeMap<Vec<u8>, f64> = BTreeMap::new();
    let mut i = 0u64;
    loop {
        let k = key(i % 5000);
        let h = t.hash(&k);
        let p = part_of(h, parts) as usize;
        let regions = if p == 0 { vec![0] } else { vec![private[p - 1], 0] };
        if t.insert_or_aggregate(h, 0, &k, FrameKind::Raw, &1.0f64.to_le_bytes(), &regions, &mut m).unwrap()
            == Insert::TableFull
        {
            break;
        }
        *shadow.entry(k).or_default() += 1.0;
        i += 1;
    }
    assert!(alloc.outstanding() <= budget);
    let dir = SpillDir::new().unwrap();
    let mut writers: Vec<_> = private.iter().map(|&r| t.spill_region(r, None, &dir, 1, &mut m).unwrap()).collect();
    t.relocate(
        reserve,
        |h| (part_of(h, parts) == 0).then_some(0),
        |h, k, s| {
            assert!(alloc.outstanding() <= budget);
            writers[part_of(h, parts) as usize - 1].push_group(k, s, &mut m)?;
            Ok(())
        },
    )
    .unwrap();
    assert!(alloc.high_water() <= budget);
    let mut got = contents(&t);
    assert!(got.keys().all(|k| part_of(agg_hash::hash_key(k, 31), parts) == 0));
    for k in got.keys() {
        let h = t.hash(k);
        assert_eq!(t.membership_probe(h, 0, k, &mut m), Probe::Found);
    }
    for w in writers {
        for (k, v) in run_contents(&w.finish(&mut m).unwrap().unwrap(), 1024) {
            assert!(got.insert(k, v).is_none());
        }
    }
    assert_eq!(got, shadow);
    // the table keeps aggregating partition 0 afterwards
    let k0 = shadow.keys().find(|k| part_of(agg_hash::hash_key(k, 31), parts) == 0).unwrap().clone();
    assert_eq!(put(&mut t, &k0, 1.0, &mut m), Insert::Aggregated);
    assert!(alloc.high_water() <= budget);
}

#[test]
fn slot_ranges_partition_chains() {
    let layout = TableLayout::compute(10, 1024, 25, 1.0, false).unwrap();
    let alloc = FrameAllocator::new(10, 1024);
    let mut t = ChainedHashTable::new(&alloc, layout, AggSpec::sum(), 9, 3).unwrap();
    let regions = [0, t.add_region(usize::MAX), t.add_region(usize::MAX)];
    let mut m = Metrics::default();
    let mut shadow = [BTreeMap::new(), BTreeMap::new(), BTreeMap::new()];
    for i in 0..150u64 {
        let k = key(i);
        let h = t.hash(&k);
        let p = part_of(h, 3) as usize;
        t.insert_or_aggregate(h, p, &k, FrameKind::Raw, &2.0f64.to_le_bytes(), &[regions[p]], &mut m).unwrap();
        shadow[p].insert(k, 2.0);
    }
    let dir = SpillDir::new().unwrap();
    let run = t.spill_region(regions[1], Some(1), &dir, 0, &mut m).unwrap().finish(&mut m).unwrap().unwrap();
    assert_eq!(run_contents(&run, 1024).into_iter().collect::<BTreeMap<_, _>>(), shadow[1]);
    let mut rest = shadow[0].clone();
    rest.extend(shadow[2].clone());
    assert_eq!(contents(&t), rest);
}
