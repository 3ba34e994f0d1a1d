use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use agg_core::{DatasetStats, Frame, FrameKind, InputRecord, FRAME_HEADER};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use crate::error::SpecError;
use crate::spec::{key_bytes, DatasetSpec, Distribution};

/// A generated dataset: key numbers and payloads in arrival order.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub spec: DatasetSpec,
    ids: Vec<u64>,
    payloads: Vec<f64>,
}

/// Exact per-key record count and payload sum.
pub type GroundTruth = BTreeMap<Vec<u8>, (u64, f64)>;

/// Key numbers with every key present at least once and the rest drawn from
/// the distribution.
fn draw_ids(spec: &DatasetSpec, rng: &mut StdRng) -> Vec<u64> {
    let (n, m) = (spec.n, spec.m);
    let mut ids: Vec<u64> = Vec::with_capacity(n as usize);
    match spec.distribution {
        Distribution::Uniform | Distribution::SortedUniform => {
            let (q, r) = (n / m, n % m);
            for k in 0..m {
                let copies = q + (k < r) as u64;
                ids.extend(std::iter::repeat_n(k, copies as usize));
            }
        }
        Distribution::HeavyHitter => {
            ids.extend(std::iter::repeat_n(0, (n - m + 1) as usize));
            ids.extend(1..m);
        }
        Distribution::Zipf(s) => {
            let mut cdf = Vec::with_capacity(m as usize);
            let mut acc = 0.0;
            for r in 0..m {
                acc += 1.0 / ((r + 1) as f64).powf(s);
                cdf.push(acc);
            }
            ids.extend(0..m);
            for _ in m..n {
                let u = rng.gen::<f64>() * acc;
                let r = cdf.partition_point(|&c| c <= u).min(m as usize - 1);
                ids.push(r as u64);
            }
        }
        Distribution::SelfSimilar(h) => {
            let e = h.ln() / (1.0 - h).ln();
            ids.extend(0..m);
            for _ in m..n {
                let r = (m as f64 * rng.gen::<f64>().powf(e)) as u64;
                ids.push(r.min(m - 1));
            }
        }
    }
    if !spec.distribution.is_sorted() {
        ids.shuffle(rng);
    }
    ids
}

impl Dataset {
    pub fn generate(spec: &DatasetSpec) -> Result<Self, SpecError> {
        spec.validate()?;
        let mut rng = StdRng::seed_from_u64(spec.seed);
        let ids = draw_ids(spec, &mut rng);
        // revenue in [1, 1000] on a 1/64 grid, so sums stay exact
        let payloads = (0..ids.len()).map(|_| rng.gen_range(64..=64_000) as f64 / 64.0).collect();
        Ok(Dataset { spec: spec.clone(), ids, payloads })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn key(&self, i: usize) -> Vec<u8> {
        key_bytes(self.spec.key_style, self.ids[i])
    }

    pub fn records(&self) -> impl Iterator<Item = InputRecord> + '_ {
        (0..self.len()).map(|i| InputRecord::new(self.key(i), self.payloads[i]))
    }

    /// The records packed into raw frames of `frame_size` bytes.
    pub fn frames(&self, frame_size: usize) -> impl Iterator<Item = Frame> + '_ {
        let mut recs = self.records().peekable();
        std::iter::from_fn(move || {
            recs.peek()?;
            let mut f = Frame::new(frame_size);
            f.reset(FrameKind::Raw, 1);
            while let Some(r) = recs.peek() {
                if r.write_to(&mut f).is_err() {
                    break;
                }
                recs.next();
            }
            Some(f)
        })
    }

    pub fn truth(&self) -> GroundTruth {
        let mut t = GroundTruth::new();
        for (i, &p) in self.payloads.iter().enumerate() {
            let e = t.entry(self.key(i)).or_insert((0, 0.0));
            e.0 += 1;
            e.1 += p;
        }
        t
    }

    /// Exact sizes for a given frame size and aggregate state width.
    pub fn stats(&self, frame_size: usize, state_bytes: usize) -> Result<DatasetStats, SpecError> {
        let key = self.spec.key_len();
        let per_frame = |rec: usize| (frame_size - FRAME_HEADER) / rec;
        Ok(DatasetStats::from_counts(
            self.spec.n,
            self.spec.m,
            per_frame(2 + key + agg_core::FIELD_BYTES),
            per_frame(2 + key + state_bytes),
        )?)
    }

    /// Writes the frames to `path` in the dataset file format.
    pub fn write(&self, path: &Path, frame_size: usize) -> Result<u64, SpecError> {
        crate::file::write_frames(path, frame_size, self.frames(frame_size))
    }

    /// Writes `key \t count \t sum` lines in key order.
    pub fn write_truth(&self, path: &Path) -> Result<(), SpecError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        for (k, (c, s)) in self.truth() {
            writeln!(w, "{}\t{c}\t{s}", crate::file::encode_key(&k))?;
        }
        w.flush()?;
        Ok(())
    }
}
