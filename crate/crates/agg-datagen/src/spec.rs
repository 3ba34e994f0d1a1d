use std::fmt;
use std::str::FromStr;

use crate::error::SpecError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distribution {
    /// Every key equally often.
    Uniform,
    /// Rank `r` drawn with weight `1 / (r + 1)^s`.
    Zipf(f64),
    /// A fraction `h` of the keys receives a fraction `1 - h` of the records.
    SelfSimilar(f64),
    /// One key takes every record not needed to give the others one each.
    HeavyHitter,
    /// Uniform, emitted in key order.
    SortedUniform,
}

impl Distribution {
    pub fn name(&self) -> String {
        match self {
            Distribution::Uniform => "uniform".into(),
            Distribution::Zipf(s) => format!("zipf:{s}"),
            Distribution::SelfSimilar(h) => format!("self_similar:{h}"),
            Distribution::HeavyHitter => "heavy_hitter".into(),
            Distribution::SortedUniform => "sorted_uniform".into(),
        }
    }

    pub fn is_sorted(&self) -> bool {
        matches!(self, Distribution::SortedUniform)
    }

    pub fn is_skewed(&self) -> bool {
        matches!(self, Distribution::Zipf(_) | Distribution::SelfSimilar(_) | Distribution::HeavyHitter)
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Distribution {
    type Err = SpecError;

    /// Accepts `uniform`, `zipf[:s]`, `self_similar[:h]`, `heavy_hitter` and
    /// `sorted_uniform`; skew defaults to 0.5 and 0.2.
    fn from_str(s: &str) -> Result<Self, SpecError> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let param = |default: f64| -> Result<f64, SpecError> {
            match arg {
                None => Ok(default),
                Some(a) => a.parse().map_err(|_| SpecError::UnknownDistribution(s.to_string())),
            }
        };
        match name {
            "uniform" => Ok(Distribution::Uniform),
            "zipf" => Ok(Distribution::Zipf(param(0.5)?)),
            "self_similar" => Ok(Distribution::SelfSimilar(param(0.2)?)),
            "heavy_hitter" => Ok(Distribution::HeavyHitter),
            "sorted_uniform" => Ok(Distribution::SortedUniform),
            _ => Err(SpecError::UnknownDistribution(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyStyle {
    /// `hhhh:hhhh::2001`, 15 bytes.
    Ipv6Like,
    /// 8-byte big-endian integer.
    Integer,
}

impl FromStr for KeyStyle {
    type Err = SpecError;

    fn from_str(s: &str) -> Result<Self, SpecError> {
        match s {
            "ipv6_like" | "ipv6" => Ok(KeyStyle::Ipv6Like),
            "integer" | "int" => Ok(KeyStyle::Integer),
            _ => Err(SpecError::UnknownDistribution(s.to_string())),
        }
    }
}

/// Renders key number `id`. Byte order of keys follows numeric order.
pub fn key_bytes(style: KeyStyle, id: u64) -> Vec<u8> {
    match style {
        KeyStyle::Ipv6Like => format!("{:04x}:{:04x}::2001", (id >> 16) & 0xffff, id & 0xffff).into_bytes(),
        KeyStyle::Integer => id.to_be_bytes().to_vec(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    /// Records.
    pub n: u64,
    /// Distinct keys.
    pub m: u64,
    pub distribution: Distribution,
    pub seed: u64,
    pub key_style: KeyStyle,
}

impl DatasetSpec {
    pub fn new(n: u64, m: u64, distribution: Distribution, seed: u64) -> Self {
        DatasetSpec { n, m, distribution, seed, key_style: KeyStyle::Ipv6Like }
    }

    pub fn key_style(mut self, style: KeyStyle) -> Self {
        self.key_style = style;
        self
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if self.m == 0 {
            return Err(SpecError::NoKeys);
        }
        if self.m > self.n {
            return Err(SpecError::TooManyKeys { n: self.n, m: self.m });
        }
        if self.key_style == KeyStyle::Ipv6Like && self.m > 1 << 32 {
            return Err(SpecError::KeySpace(self.m));
        }
        match self.distribution {
            Distribution::Zipf(x) | Distribution::SelfSimilar(x) if !(x > 0.0 && x < 1.0) => Err(SpecError::BadSkew(x)),
            _ => Ok(()),
        }
    }

    pub fn key_len(&self) -> usize {
        key_bytes(self.key_style, 0).len()
    }
}

/// Distinct keys over records, in percent.
pub fn cardinality_ratio(spec: &DatasetSpec) -> f64 {
    100.0 * spec.m as f64 / spec.n as f64
}
