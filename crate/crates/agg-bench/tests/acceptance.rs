//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero when any criterion fails.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use agg_bench::experiment::validate;
use agg_bench::{run_cell, Cell, CellOutcome, ExperimentConfig, Loaded};
use agg_core::{AggSpec, AggregateFunction, FrameAllocator, FrameKind, Metrics};
use agg_cost::{h_u, i_key, i_raw, merge_cost};
use agg_datagen::{DatasetSpec, Distribution, KeyStyle};
use agg_hash::{bloom_false_positive, ChainedHashTable, Insert, Probe, TableLayout};
use agg_ops::AlgorithmId;
use agg_run::{merge_runs, MergeOptions, OrderKind, RunError, RunWriter, SpillDir};
use rand::{rngs::StdRng, seq::SliceRandom, Rng, SeedableRng};

struct Verdict {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn verdict(id: &'static str, pass: bool, detail: String) -> Verdict {
    Verdict { id, pass, detail }
}

fn load(n: u64, m: u64, dist: Distribution, frame_size: usize, seed: u64) -> (ExperimentConfig, Loaded) {
    let cfg = ExperimentConfig {
        dataset: DatasetSpec::new(n, m, dist, seed),
        frame_size,
        ..ExperimentConfig::default()
    };
    let data = Loaded::generate(&cfg).expect("dataset");
    (cfg, data)
}

fn run(data: &Loaded, cfg: &ExperimentConfig, alg: AlgorithmId, memory: usize, tweak: impl FnOnce(&mut Cell)) -> CellOutcome {
    let mut c = Cell::new(alg, memory);
    c.frame_size = cfg.frame_size;
    c.key_bytes = data.key_bytes;
    c.sorted_input = data.sorted;
    tweak(&mut c);
    run_cell(&data.frames, &data.truth, &data.stats, &c).expect("cell")
}

fn io(m: &Metrics) -> u64 {
    m.frames_read + m.frames_written
}

fn oracle_and_memory() -> [Verdict; 2] {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(2024);
    let dists = [
        Distribution::Uniform,
        Distribution::SortedUniform,
        Distribution::HeavyHitter,
        Distribution::Zipf(0.5),
        Distribution::Zipf(0.9),
        Distribution::SelfSimilar(0.2),
    ];
    let (mut cells, mut wrong, mut over, mut errors, mut spilled) = (0, 0, 0, 0, 0);
    let mut first_issue = String::new();
    let mut datasets = 0u64;
    while cells < 1020 {
        datasets += 1;
        let n = if datasets.is_multiple_of(12) {
            rng.gen_range(200_000..=1_000_000)
        } else {
            10f64.powf(rng.gen_range(2.0..5.0)) as u64
        };
        let ratio = *[1.0, 0.441, 0.0625, 0.0002, rng.gen_range(0.0..1.0)].choose(&mut rng).unwrap();
        let m = ((n as f64 * ratio).round() as u64).clamp(1, n);
        let dist = *dists.choose(&mut rng).unwrap();
        let style = if rng.gen_bool(0.25) { KeyStyle::Integer } else { KeyStyle::Ipv6Like };
        let frame_size = *[512usize, 1024, 4096, 32768].choose(&mut rng).unwrap();
        let cfg = ExperimentConfig {
            dataset: DatasetSpec::new(n, m, dist, rng.gen()).key_style(style),
            frame_size,
            ..ExperimentConfig::default()
        };
        let data = Loaded::generate(&cfg).expect("dataset");
        let top = (2 * data.frames.len() + 8).min(4096) as f64;
        let memory = (4.0 * (top / 4.0).powf(rng.gen_range(0.0..1.0f64))).round() as usize;
        let aggs = if rng.gen_bool(0.3) {
            AggSpec::new(vec![AggregateFunction::Count, AggregateFunction::Sum, AggregateFunction::Min, AggregateFunction::Avg])
        } else {
            AggSpec::sum()
        };
        let g_error = *[1.0, 1.0, 1.0, 0.25, 4.0].choose(&mut rng).unwrap();
        for alg in AlgorithmId::ALL {
            cells += 1;
            let mut c = Cell::new(alg, memory);
            c.frame_size = frame_size;
            c.key_bytes = data.key_bytes;
            c.sorted_input = data.sorted && rng.gen_bool(0.5);
            c.aggs = aggs.clone();
            c.g_error_ratio = g_error;
            c.seed = rng.gen();
            let tag = format!("{alg} {} n={n} m={m} p={frame_size} M={memory}", dist.name());
            match run_cell(&data.frames, &data.truth, &data.stats, &c) {
                Ok(out) => {
                    if out.metrics.frames_written > 0 {
                        spilled += 1;
                    }
                    if let Err(e) = &out.verdict {
                        wrong += 1;
                        if first_issue.is_empty() {
                            first_issue = format!("{tag}: {e}");
                        }
                    }
                    if out.high_water > memory {
                        over += 1;
                        if first_issue.is_empty() {
                            first_issue = format!("{tag}: high water {}", out.high_water);
                        }
                    }
                }
                Err(e) => {
                    errors += 1;
                    if first_issue.is_empty() {
                        first_issue = format!("{tag}: {e}");
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let note = if first_issue.is_empty() { String::new() } else { format!("; first issue: {first_issue}") };
    [
        verdict(
            "1 correctness oracle",
            wrong == 0 && errors == 0 && elapsed < Duration::from_secs(600),
            format!("{cells} cells ({spilled} spilling) over {datasets} datasets, {wrong} mismatches, {errors} errors, {:.0}s{note}", elapsed.as_secs_f64()),
        ),
        verdict("2 memory bound", over == 0 && errors == 0, format!("{over} of {cells} cells above M")),
    ]
}

fn model_validation() -> Verdict {
    let start = Instant::now();
    let (mut worst_io, mut worst_cpu, mut bad, mut cells) = (0.0f64, 0.0f64, 0, 0);
    let mut worst = String::new();
    for m in [1_000_000u64, 441_000, 62_500, 200] {
        let (cfg, data) = load(1_000_000, m, Distribution::Uniform, agg_core::DEFAULT_FRAME_SIZE, 1);
        for row in validate(&cfg, &data).expect("validate") {
            cells += 1;
            let io_err = row.errors[1].max(row.errors[2]);
            if io_err > worst_io {
                worst_io = io_err;
                worst = format!("{} M={} m={m}", row.algorithm, row.memory);
            }
            worst_cpu = worst_cpu.max(row.errors[0]);
            if io_err > 0.10 || row.errors[0] > 0.25 || row.verdict.is_err() {
                bad += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        "3 model validation",
        bad == 0 && elapsed < Duration::from_secs(1200),
        format!(
            "{cells} cells, max I/O error {:.1}% ({worst}), max comparisons error {:.1}%, {bad} out of bounds, {:.0}s",
            100.0 * worst_io,
            100.0 * worst_cpu,
            elapsed.as_secs_f64()
        ),
    )
}

fn sized_table(slots: usize, groups: usize, bloom: bool) -> TableLayout {
    let p = 4096;
    let mut l = TableLayout::compute(2, p, 25, 1.0, bloom).unwrap();
    l.slots = slots;
    l.slot_frames = slots.div_ceil(p / l.slot_bytes);
    l.list_frames = groups.div_ceil(l.entries_per_frame);
    l.capacity = l.list_frames * l.entries_per_frame;
    l.frames = l.slot_frames + l.list_frames;
    l
}

fn hand_schedule(mut k: usize, f: usize) -> Vec<usize> {
    let mut out = vec![];
    while k > f {
        let take = if k < 2 * f { k - f + 1 } else { f };
        out.push(take);
        k = k - take + 1;
    }
    out.push(k);
    out
}

fn component_oracles() -> Verdict {
    let mut rng = StdRng::seed_from_u64(4);
    let mut keys: Vec<u32> = (0..1000).map(|i| i % 100).collect();
    let trials = 100_000;
    let (mut distinct, mut drawn) = (0usize, 0usize);
    for _ in 0..trials {
        keys.shuffle(&mut rng);
        distinct += keys[..500].iter().collect::<HashSet<_>>().len();
        let mut seen = [false; 100];
        let mut d = 0;
        for (i, &k) in keys.iter().enumerate() {
            if !std::mem::replace(&mut seen[k as usize], true) {
                d += 1;
                if d == 50 {
                    drawn += i + 1;
                    break;
                }
            }
        }
    }
    let key_err = (i_key(500.0, 1000.0, 100.0).unwrap() - distinct as f64 / trials as f64).abs() / (distinct as f64 / trials as f64);
    let raw_err = (i_raw(50.0, 1000.0, 100.0).unwrap() - drawn as f64 / trials as f64).abs() / (drawn as f64 / trials as f64);

    let mut slot_err = 0.0f64;
    for &(h, k) in &[(1000usize, 500usize), (1000, 1000), (1000, 3000), (4096, 4096), (4096, 10_000)] {
        let mut total = 0.0;
        for seed in 0..20u64 {
            let layout = sized_table(h, k, false);
            let alloc = FrameAllocator::new(layout.frames, 4096);
            let mut t = ChainedHashTable::new(&alloc, layout, AggSpec::sum(), seed, 1).unwrap();
            let mut m = Metrics::default();
            for i in 0..k as u64 {
                let kb = format!("{:015}", i * 31 + seed * 1_000_003).into_bytes();
                let hv = t.hash(&kb);
                t.insert_or_aggregate(hv, 0, &kb, FrameKind::Raw, &1.0f64.to_le_bytes(), &[0], &mut m).unwrap();
            }
            total += t.occupied_slots() as f64;
        }
        let measured = total / 20.0;
        slot_err = slot_err.max((h_u(k as f64, h as f64) - measured).abs() / measured);
    }

    let mut merge_ok = 0;
    let instances = 60;
    for _ in 0..instances {
        let runs = rng.gen_range(1..40usize);
        let budget = rng.gen_range(3..9usize);
        let model = merge_cost(vec![1usize; runs], budget - 1, |rs| (rs.iter().sum(), 0.0)).unwrap();
        let dir = SpillDir::new().unwrap();
        let mut m = Metrics::default();
        let files = (0..runs)
            .map(|_| {
                let mut ks: Vec<u32> = (0..4).map(|_| rng.gen_range(0..100)).collect();
                ks.sort();
                let mut w = RunWriter::create(&dir, agg_core::Frame::new(256), OrderKind::ByKey, 0).unwrap();
                let mut rec = Vec::new();
                for k in ks {
                    rec.clear();
                    agg_core::record::encode(format!("{k:08}").as_bytes(), &1.0f64.to_le_bytes(), &mut rec);
                    w.push(FrameKind::Raw, 1, &rec, &mut m).unwrap();
                }
                w.finish(&mut m).unwrap().unwrap()
            })
            .collect();
        let alloc = FrameAllocator::new(budget, 256);
        let zero = |_: &[u8]| 0u64;
        let opts = MergeOptions { fan_in: budget - 1, order: OrderKind::ByKey, combine_intermediate: false, prefix: &zero };
        let trace = merge_runs(files, &opts, &AggSpec::sum(), &alloc, &dir, &mut m, &mut |_, _, _| Ok::<_, RunError>(()))
            .unwrap();
        if model.rounds == hand_schedule(runs, budget - 1) && model.rounds == trace.rounds {
            merge_ok += 1;
        }
    }
    verdict(
        "4 component oracles",
        key_err < 0.01 && raw_err < 0.01 && slot_err < 0.05 && merge_ok == instances,
        format!(
            "I_key error {:.2}%, I_raw error {:.2}%, occupied slots error {:.2}%, merge schedules {merge_ok}/{instances}",
            100.0 * key_err,
            100.0 * raw_err,
            100.0 * slot_err
        ),
    )
}

fn orderings() -> Verdict {
    let mut notes = vec![];
    let p = agg_core::DEFAULT_FRAME_SIZE;

    let (cfg, data) = load(1_000_000, 62_500, Distribution::SortedUniform, p, 3);
    let mut a = true;
    for mem in [16, 64] {
        let sort = io(&run(&data, &cfg, AlgorithmId::SortBased, mem, |_| {}).metrics);
        let rest: Vec<u64> = AlgorithmId::ALL[1..].iter().map(|&alg| io(&run(&data, &cfg, alg, mem, |_| {}).metrics)).collect();
        a &= rest.iter().all(|&r| sort < r);
        notes.push(format!("(a) M={mem}: sort {sort} vs others min {}", rest.iter().min().unwrap()));
    }

    let (cfg, data) = load(1_000_000, 62_500, Distribution::HeavyHitter, p, 4);
    let mut b = true;
    for mem in [8, 16] {
        let hs = run(&data, &cfg, AlgorithmId::HashSort, mem, |_| {}).metrics;
        let orig = run(&data, &cfg, AlgorithmId::OriginalHH, mem, |_| {}).metrics;
        let total = |m: &Metrics| m.frames_read_total + m.frames_written_total;
        b &= total(&hs) < total(&orig) && orig.fallbacks > 0;
        notes.push(format!("(b) M={mem}: hash-sort {} vs original {} with {} fallbacks", total(&hs), total(&orig), orig.fallbacks));
    }

    let mut c = true;
    for m in [200u64, 62_500] {
        let (cfg, data) = load(1_000_000, m, Distribution::Uniform, p, 5);
        for mem in [16, 48] {
            let sort = run(&data, &cfg, AlgorithmId::SortBased, mem, |_| {}).metrics.frames_written;
            let worst = AlgorithmId::HYBRID
                .iter()
                .map(|&alg| run(&data, &cfg, alg, mem, |_| {}).metrics.frames_written)
                .max()
                .unwrap();
            c &= sort > 0 && worst < sort;
            notes.push(format!("(c) m={m} M={mem}: sort {sort} vs hybrids max {worst}"));
        }
    }
    verdict("5 qualitative orderings", a && b && c, notes.join("; "))
}

fn error_sweep() -> Verdict {
    let (cfg, data) = load(1_000_000, 200, Distribution::Uniform, 1024, 6);
    let ratios = [4096.0, 64.0, 1.0, 1.0 / 64.0, 1.0 / 4096.0];
    let mut ok = true;
    let mut correct = true;
    let mut notes = vec![];
    for mem in [8, 16] {
        let mut spread = vec![];
        for alg in AlgorithmId::HYBRID {
            let written: Vec<u64> = ratios
                .iter()
                .map(|&r| {
                    let out = run(&data, &cfg, alg, mem, |c| c.g_error_ratio = r);
                    correct &= out.verdict.is_ok();
                    out.metrics.frames_written
                })
                .collect();
            let max = *written.iter().max().unwrap() as f64;
            let min = (*written.iter().min().unwrap()).max(1) as f64;
            spread.push((alg, max / min));
        }
        let pp = spread.iter().find(|s| s.0 == AlgorithmId::PrePartitioning).unwrap().1;
        ok &= spread.iter().all(|s| pp <= s.1);
        notes.push(format!(
            "M={mem}: {}",
            spread.iter().map(|(a, r)| format!("{a} {r:.1}")).collect::<Vec<_>>().join(", ")
        ));
    }
    verdict("6 estimation-error sweep", ok && correct, format!("max/min frames written, p=1024: {}; oracle {}", notes.join("; "), if correct { "ok" } else { "MISMATCH" }))
}

fn residency() -> Verdict {
    let mut rng = StdRng::seed_from_u64(7);
    let (mut overlap, mut passes, mut spilling, mut wrong) = (0u64, 0usize, 0usize, 0usize);
    for i in 0..200 {
        let n = 10f64.powf(rng.gen_range(3.0..5.3)) as u64;
        let m = ((n as f64 * rng.gen_range(0.01..1.0)) as u64).max(1);
        let dist = *[Distribution::Uniform, Distribution::Zipf(0.7), Distribution::HeavyHitter].choose(&mut rng).unwrap();
        let frame_size = *[512usize, 1024, 4096].choose(&mut rng).unwrap();
        let (cfg, data) = load(n, m, dist, frame_size, i);
        let memory = rng.gen_range(4..=(data.frames.len() / 2 + 6).min(256));
        let g_error = *[1.0, 0.5, 0.1, 2.0].choose(&mut rng).unwrap();
        let out = run(&data, &cfg, AlgorithmId::PrePartitioning, memory, |c| {
            c.audit = true;
            c.g_error_ratio = g_error;
            c.seed = i;
        });
        wrong += out.verdict.is_err() as usize;
        passes += out.audit.len();
        spilling += out.audit.iter().any(|a| a.spilled_keys > 0) as usize;
        overlap += out.audit.iter().map(|a| a.overlap).sum::<u64>();
    }
    verdict(
        "7 pre-partitioning residency",
        overlap == 0 && wrong == 0 && spilling > 0,
        format!("200 cells, {spilling} spilling, {passes} audited passes, {overlap} resident keys in spill files, {wrong} mismatches"),
    )
}

fn bloom() -> Verdict {
    let p = 4096;
    let layout = TableLayout::compute(40, p, 25, 1.0, true).unwrap();
    let alloc = FrameAllocator::new(40, p);
    let mut t = ChainedHashTable::new(&alloc, layout, AggSpec::sum(), 11, 1).unwrap();
    let mut m = Metrics::default();
    let mut stored = vec![];
    let mut rng = StdRng::seed_from_u64(8);
    loop {
        let k = format!("{:015x}", rng.gen::<u64>() >> 4).into_bytes();
        let h = t.hash(&k);
        match t.insert_or_aggregate(h, 0, &k, FrameKind::Raw, &1.0f64.to_le_bytes(), &[0], &mut m).unwrap() {
            Insert::TableFull => break,
            Insert::Inserted => stored.push(k),
            Insert::Aggregated => {}
        }
    }
    let present: HashSet<&Vec<u8>> = stored.iter().collect();
    let loads = t.slot_loads();
    let predicted = loads.iter().map(|&j| bloom_false_positive(j)).sum::<f64>() / loads.len() as f64;
    let (mut negatives, mut absent, mut passed) = (0u64, 0u64, 0u64);
    for _ in 0..1_000_000 {
        if rng.gen_bool(0.5) {
            let k = stored.choose(&mut rng).unwrap();
            if t.membership_probe(t.hash(k), 0, k, &mut m) != Probe::Found {
                negatives += 1;
            }
        } else {
            let k = format!("{:015x}", rng.gen::<u64>() >> 4).into_bytes();
            if present.contains(&k) {
                continue;
            }
            absent += 1;
            if t.membership_probe(t.hash(&k), 0, &k, &mut m) != Probe::DefinitelyAbsent {
                passed += 1;
            }
        }
    }
    let measured = passed as f64 / absent as f64;
    verdict(
        "8 bloom filter",
        negatives == 0 && measured <= 2.0 * predicted && measured >= predicted / 2.0,
        format!("1000000 probes, {negatives} false negatives, false-positive rate {measured:.4} vs closed form {predicted:.4}"),
    )
}

fn main() {
    let start = Instant::now();
    let mut all = vec![];
    let report = |v: &Verdict| println!("criterion {}: {} ({})", v.id, if v.pass { "PASS" } else { "FAIL" }, v.detail);
    for v in oracle_and_memory() {
        report(&v);
        all.push(v);
    }
    for f in [model_validation, component_oracles, orderings, error_sweep, residency, bloom] {
        let v = f();
        report(&v);
        all.push(v);
    }
    let failed = all.iter().filter(|v| !v.pass).count();
    println!("acceptance: {} of {} criteria pass in {:.0}s", all.len() - failed, all.len(), start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
