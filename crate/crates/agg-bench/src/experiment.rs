use std::io::Write;
use std::time::Duration;

use agg_core::{AggSpec, DatasetStats, Frame, FrameKind};
use agg_cost::{predict, CostParameters, CostReport};
use agg_datagen::{read_truth, Dataset, DatasetReader, GroundTruth};
use agg_ops::AlgorithmId;

use crate::config::ExperimentConfig;
use crate::error::BenchError;
use crate::runner::{run_cell, Cell, CellOutcome};

/// A dataset held in memory together with its ground truth.
pub struct Loaded {
    pub frames: Vec<Frame>,
    pub truth: GroundTruth,
    pub stats: DatasetStats,
    pub distribution: String,
    pub key_bytes: usize,
    pub sorted: bool,
}

impl Loaded {
    pub fn generate(cfg: &ExperimentConfig) -> Result<Self, BenchError> {
        let ds = Dataset::generate(&cfg.dataset)?;
        Ok(Loaded {
            frames: ds.frames(cfg.frame_size).collect(),
            truth: ds.truth(),
            stats: ds.stats(cfg.frame_size, AggSpec::sum().state_bytes())?,
            distribution: cfg.dataset.distribution.name(),
            key_bytes: cfg.dataset.key_len(),
            sorted: cfg.dataset.distribution.is_sorted(),
        })
    }

    /// Reads `cfg.input` and `cfg.truth`, or generates `cfg.dataset`.
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self, BenchError> {
        let Some(path) = &cfg.input else { return Self::generate(cfg) };
        let truth_path = cfg.truth.clone().ok_or_else(|| BenchError::Config("input needs a truth file".into()))?;
        let truth = read_truth(&truth_path)?;
        let mut reader = DatasetReader::open(path)?;
        let mut frames = Vec::with_capacity(reader.frames() as usize);
        let mut key_bytes = 0;
        loop {
            let mut f = Frame::new(reader.frame_size());
            f.reset(FrameKind::Raw, 1);
            if !reader.next_into(&mut f)? {
                break;
            }
            if key_bytes == 0 {
                key_bytes = f.records().next().map_or(0, |r| agg_core::record::key(r).len());
            }
            frames.push(f);
        }
        let n: u64 = truth.values().map(|v| v.0).sum();
        let per = |rec: usize| (reader.frame_size() - agg_core::FRAME_HEADER) / rec;
        let stats = DatasetStats::from_counts(n, truth.len() as u64, per(2 + key_bytes + 8), per(2 + key_bytes + 8))?;
        Ok(Loaded { frames, truth, stats, distribution: "file".into(), key_bytes, sorted: false })
    }
}

fn cell(cfg: &ExperimentConfig, data: &Loaded, algorithm: AlgorithmId, memory: usize, rep: usize) -> Cell {
    let mut c = Cell::new(algorithm, memory);
    c.frame_size = cfg.frame_size;
    c.slot_ratio = cfg.slot_ratio;
    c.fudge = cfg.fudge;
    c.g_error_ratio = cfg.g_error_ratio;
    c.seed = cfg.seed.wrapping_add(rep as u64);
    c.key_bytes = data.key_bytes;
    c.sorted_input = data.sorted;
    c
}

pub struct RunRow {
    pub cell: Cell,
    pub repetition: usize,
    pub outcome: CellOutcome,
}

/// Runs every (algorithm, memory, repetition) cell.
pub fn run(cfg: &ExperimentConfig, data: &Loaded) -> Result<Vec<RunRow>, BenchError> {
    let mut rows = Vec::new();
    for &a in &cfg.algorithms {
        for &mem in &cfg.memory {
            for rep in 0..cfg.repetitions {
                let c = cell(cfg, data, a, mem, rep);
                let outcome = run_cell(&data.frames, &data.truth, &data.stats, &c)?;
                rows.push(RunRow { cell: c, repetition: rep, outcome });
            }
        }
    }
    Ok(rows)
}

pub fn parameters(cfg: &ExperimentConfig, data: &Loaded, memory: usize) -> CostParameters {
    let rec = 2 + data.key_bytes + 8;
    CostParameters::new(memory)
        .frame_size(cfg.frame_size)
        .record_bytes(rec, rec)
        .slot_ratio(cfg.slot_ratio)
        .fudge(cfg.fudge)
        .sorted_input(data.sorted)
}

/// Model predictions for every (algorithm, memory) cell.
pub fn model(cfg: &ExperimentConfig, data: &Loaded) -> Result<Vec<CostReport>, BenchError> {
    let r = cfg.g_error_ratio;
    let s = &data.stats;
    let est = DatasetStats::new(s.r, s.r_t, s.g * r, s.g_t)?;
    let mut out = Vec::new();
    for &a in &cfg.algorithms {
        for &mem in &cfg.memory {
            out.push(predict(a, &est, &parameters(cfg, data, mem))?);
        }
    }
    Ok(out)
}

/// Relative error of a prediction; a measurement of zero counts as one.
pub fn relative_error(predicted: f64, measured: f64) -> f64 {
    if predicted == measured {
        return 0.0;
    }
    (predicted - measured).abs() / measured.max(1.0)
}

#[derive(Debug, Clone)]
pub struct ValidationRow {
    pub algorithm: AlgorithmId,
    pub memory: usize,
    /// Comparisons, frames read, frames written.
    pub measured: [f64; 3],
    pub predicted: [f64; 3],
    pub errors: [f64; 3],
    pub verdict: Result<(), String>,
}

/// Runs each cell once and sets it against its prediction.
pub fn validate(cfg: &ExperimentConfig, data: &Loaded) -> Result<Vec<ValidationRow>, BenchError> {
    let mut one = cfg.clone();
    one.repetitions = 1;
    let runs = run(&one, data)?;
    let models = model(&one, data)?;
    Ok(runs
        .into_iter()
        .zip(models)
        .map(|(r, p)| {
            let m = &r.outcome.metrics;
            let measured = [m.comparisons as f64, m.frames_read as f64, m.frames_written as f64];
            let predicted = [p.comparisons, p.frames_read, p.frames_written];
            let errors = [0, 1, 2].map(|i| relative_error(predicted[i], measured[i]));
            ValidationRow { algorithm: r.cell.algorithm, memory: r.cell.memory, measured, predicted, errors, verdict: r.outcome.verdict }
        })
        .collect())
}

fn ms(d: Duration) -> String {
    format!("{:.3}", d.as_secs_f64() * 1000.0)
}

pub const RUN_HEADER: [&str; 15] = [
    "algo",
    "M",
    "F",
    "slot_ratio",
    "distribution",
    "n",
    "m",
    "comparisons",
    "frames_read",
    "frames_written",
    "ttfr_ms",
    "total_ms",
    "seed",
    "frames_read_total",
    "frames_written_total",
];

fn prefix(cfg: &ExperimentConfig, data: &Loaded, a: AlgorithmId, mem: usize) -> Vec<String> {
    vec![
        a.to_string(),
        mem.to_string(),
        cfg.fudge.to_string(),
        cfg.slot_ratio.to_string(),
        data.distribution.clone(),
        data.stats.r_t.to_string(),
        data.stats.g_t.to_string(),
    ]
}

/// Measurement rows; with several repetitions each cell also gets a `mean`
/// and a `min` row (in the seed column).
pub fn write_runs(w: impl Write, cfg: &ExperimentConfig, data: &Loaded, rows: &[RunRow]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(RUN_HEADER)?;
    for group in rows.chunk_by(|a, b| a.cell.algorithm == b.cell.algorithm && a.cell.memory == b.cell.memory) {
        for r in group {
            let m = &r.outcome.metrics;
            let mut rec = prefix(cfg, data, r.cell.algorithm, r.cell.memory);
            rec.extend([
                m.comparisons.to_string(),
                m.frames_read.to_string(),
                m.frames_written.to_string(),
                m.time_to_first_result.map(ms).unwrap_or_default(),
                ms(m.total_time),
                r.cell.seed.to_string(),
                m.frames_read_total.to_string(),
                m.frames_written_total.to_string(),
            ]);
            w.write_record(&rec)?;
        }
        if group.len() > 1 {
            let col = |f: &dyn Fn(&RunRow) -> f64| -> (f64, f64) {
                let v: Vec<f64> = group.iter().map(f).collect();
                (v.iter().sum::<f64>() / v.len() as f64, v.iter().cloned().fold(f64::INFINITY, f64::min))
            };
            let cols: [&dyn Fn(&RunRow) -> f64; 7] = [
                &|r| r.outcome.metrics.comparisons as f64,
                &|r| r.outcome.metrics.frames_read as f64,
                &|r| r.outcome.metrics.frames_written as f64,
                &|r| r.outcome.metrics.time_to_first_result.map_or(0.0, |d| d.as_secs_f64() * 1000.0),
                &|r| r.outcome.metrics.total_time.as_secs_f64() * 1000.0,
                &|r| r.outcome.metrics.frames_read_total as f64,
                &|r| r.outcome.metrics.frames_written_total as f64,
            ];
            let stats: Vec<(f64, f64)> = cols.iter().map(|f| col(*f)).collect();
            for (label, pick) in [("mean", 0usize), ("min", 1)] {
                let v: Vec<String> =
                    stats.iter().map(|s| if pick == 0 { format!("{:.3}", s.0) } else { format!("{:.3}", s.1) }).collect();
                let mut rec = prefix(cfg, data, group[0].cell.algorithm, group[0].cell.memory);
                rec.extend([&v[0], &v[1], &v[2], &v[3], &v[4]].map(String::clone));
                rec.push(label.into());
                rec.extend([v[5].clone(), v[6].clone()]);
                w.write_record(&rec)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Prediction rows in the measurement schema; timing columns stay empty and
/// the totals add the input scan and the output.
pub fn write_models(w: impl Write, cfg: &ExperimentConfig, data: &Loaded, reports: &[CostReport]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(RUN_HEADER)?;
    for p in reports {
        let mut rec = prefix(cfg, data, p.algorithm, p.memory);
        rec.extend([
            format!("{:.0}", p.comparisons),
            format!("{:.0}", p.frames_read),
            format!("{:.0}", p.frames_written),
            String::new(),
            String::new(),
            cfg.seed.to_string(),
            format!("{:.0}", p.frames_read + data.stats.r.ceil()),
            format!("{:.0}", p.frames_written + data.stats.g.ceil()),
        ]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_validation(w: impl Write, rows: &[ValidationRow]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record([
        "algo",
        "M",
        "comparisons",
        "comparisons_model",
        "comparisons_err",
        "frames_read",
        "frames_read_model",
        "frames_read_err",
        "frames_written",
        "frames_written_model",
        "frames_written_err",
        "oracle",
    ])?;
    for r in rows {
        let mut rec = vec![r.algorithm.to_string(), r.memory.to_string()];
        for i in 0..3 {
            rec.push(format!("{:.0}", r.measured[i]));
            rec.push(format!("{:.0}", r.predicted[i]));
            rec.push(format!("{:.4}", r.errors[i]));
        }
        rec.push(if r.verdict.is_ok() { "ok".into() } else { "mismatch".into() });
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
