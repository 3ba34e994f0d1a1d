use std::path::PathBuf;
use std::str::FromStr;

use agg_datagen::{DatasetSpec, Distribution, KeyStyle};
use agg_ops::AlgorithmId;

use crate::error::BenchError;

/// Parameters of one experiment sweep.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub algorithms: Vec<AlgorithmId>,
    /// Budgets in frames.
    pub memory: Vec<usize>,
    pub frame_size: usize,
    pub fudge: f64,
    pub slot_ratio: f64,
    pub g_error_ratio: f64,
    pub repetitions: usize,
    pub seed: u64,
    /// Dataset file to read instead of generating `dataset`.
    pub input: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetSpec::new(1_000_000, 62_500, Distribution::Uniform, 1),
            algorithms: AlgorithmId::ALL.to_vec(),
            memory: vec![8, 16, 48, 128, 384, 1024, 2048],
            frame_size: agg_core::DEFAULT_FRAME_SIZE,
            fudge: 1.2,
            slot_ratio: 1.0,
            g_error_ratio: 1.0,
            repetitions: 1,
            seed: 0,
            input: None,
            truth: None,
            output: None,
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T, BenchError> {
    v.parse().map_err(|_| BenchError::Config(format!("bad value {v:?} for {key}")))
}

/// A memory size: a frame count, or bytes with a `B`, `KiB`, `MiB` or `GiB`
/// suffix (`K`, `M`, `G`, `KB`, `MB`, `GB` are read as binary units too).
pub fn parse_memory(v: &str, frame_size: usize) -> Result<usize, BenchError> {
    let v = v.trim();
    let split = v.find(|c: char| !c.is_ascii_digit() && c != '.').unwrap_or(v.len());
    let (digits, unit) = v.split_at(split);
    let x: f64 = num("memory", digits)?;
    let scale = match unit.trim().to_ascii_lowercase().as_str() {
        "" => return Ok(x as usize),
        "b" => 1.0,
        "k" | "kb" | "kib" => 1024.0,
        "m" | "mb" | "mib" => 1024.0 * 1024.0,
        "g" | "gb" | "gib" => 1024.0 * 1024.0 * 1024.0,
        u => return Err(BenchError::Config(format!("unknown memory unit {u:?}"))),
    };
    Ok((x * scale / frame_size as f64).floor() as usize)
}

fn list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

impl ExperimentConfig {
    /// Reads `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, BenchError> {
        let mut cfg = ExperimentConfig::default();
        let mut memory = None;
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| BenchError::Config(format!("line {}: expected key = value", no + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if k == "memory" {
                memory = Some(v.to_string());
            } else {
                cfg.set(k, v)?;
            }
        }
        if let Some(v) = memory {
            cfg.set("memory", &v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<(), BenchError> {
        match key {
            "n" => self.dataset.n = num(key, v)?,
            "m" => self.dataset.m = num(key, v)?,
            "distribution" => self.dataset.distribution = v.parse::<Distribution>()?,
            "key_style" => self.dataset.key_style = v.parse::<KeyStyle>()?,
            "data_seed" => self.dataset.seed = num(key, v)?,
            "algorithms" | "algorithm" => {
                self.algorithms = if v == "all" {
                    AlgorithmId::ALL.to_vec()
                } else {
                    list(v).map(|a| a.parse().map_err(BenchError::Config)).collect::<Result<_, _>>()?
                }
            }
            "memory" => self.memory = list(v).map(|s| parse_memory(s, self.frame_size)).collect::<Result<_, _>>()?,
            "frame_size" => self.frame_size = num(key, v)?,
            "fudge" | "F" => self.fudge = num(key, v)?,
            "slot_ratio" => self.slot_ratio = num(key, v)?,
            "g_error_ratio" => self.g_error_ratio = parse_ratio(v)?,
            "repetitions" => self.repetitions = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "input" => self.input = Some(v.into()),
            "truth" => self.truth = Some(v.into()),
            "output" => self.output = Some(v.into()),
            _ => return Err(BenchError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if !(self.g_error_ratio > 0.0) {
            return Err(BenchError::Config("g_error_ratio must be positive".into()));
        }
        if self.repetitions == 0 {
            return Err(BenchError::Config("repetitions must be at least 1".into()));
        }
        if self.memory.is_empty() || self.algorithms.is_empty() {
            return Err(BenchError::Config("need at least one memory budget and one algorithm".into()));
        }
        self.dataset.validate()?;
        Ok(())
    }
}

/// A positive ratio, also written as a fraction such as `1/64`.
pub fn parse_ratio(v: &str) -> Result<f64, BenchError> {
    match v.split_once('/') {
        Some((a, b)) => Ok(num::<f64>("ratio", a.trim())? / num::<f64>("ratio", b.trim())?),
        None => num("ratio", v),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn memory_units() {
        assert_eq!(parse_memory("64", 32768).unwrap(), 64);
        assert_eq!(parse_memory("2MiB", 32768).unwrap(), 64);
        assert_eq!(parse_memory("65536B", 32768).unwrap(), 2);
        assert!(parse_memory("3 parsecs", 32768).is_err());
    }

    #[test]
    fn parses_key_values() {
        let cfg = ExperimentConfig::parse(
            "# sweep\nn = 1000\nm = 10\nmemory = 4, 1MiB\nframe_size = 4096\nalgorithms = sort, pre-partitioning\ng_error_ratio = 1/64\n",
        )
        .unwrap();
        assert_eq!(cfg.memory, vec![4, 256]);
        assert_eq!(cfg.algorithms, vec![AlgorithmId::SortBased, AlgorithmId::PrePartitioning]);
        assert_eq!(cfg.g_error_ratio, 1.0 / 64.0);
        assert!(ExperimentConfig::parse("n = 10\nm = 11\n").is_err());
        assert!(ExperimentConfig::parse("bogus = 1\n").is_err());
    }
}
