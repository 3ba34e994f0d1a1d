use crate::error::CoreError;

/// Sizes of an aggregation input and its result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetStats {
    /// Input size in frames.
    pub r: f64,
    /// Input record count.
    pub r_t: f64,
    /// Output size in frames.
    pub g: f64,
    /// Distinct key count.
    pub g_t: f64,
}

impl DatasetStats {
    pub fn new(r: f64, r_t: f64, g: f64, g_t: f64) -> Result<Self, CoreError> {
        let s = Self { r, r_t, g, g_t };
        if [r, r_t, g, g_t].iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(CoreError::InvalidStats("sizes must be finite and nonnegative"));
        }
        if g_t > r_t {
            return Err(CoreError::InvalidStats("more groups than records"));
        }
        Ok(s)
    }

    /// Derives frame counts from record counts and records per frame.
    pub fn from_counts(
        r_t: u64,
        g_t: u64,
        input_per_frame: usize,
        group_per_frame: usize,
    ) -> Result<Self, CoreError> {
        if input_per_frame == 0 || group_per_frame == 0 {
            return Err(CoreError::InvalidStats("a frame must hold at least one record"));
        }
        Self::new(
            r_t as f64 / input_per_frame as f64,
            r_t as f64,
            g_t as f64 / group_per_frame as f64,
            g_t as f64,
        )
    }

    /// Distinct keys over records.
    pub fn cardinality_ratio(&self) -> f64 {
        if self.r_t == 0.0 {
            0.0
        } else {
            self.g_t / self.r_t
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_more_groups_than_records() {
        assert!(DatasetStats::new(1.0, 10.0, 1.0, 11.0).is_err());
        assert!(DatasetStats::new(-1.0, 10.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn frames_from_counts() {
        let s = DatasetStats::from_counts(1_000_000, 200, 1310, 1310).unwrap();
        assert!((s.r - 763.36).abs() < 0.01);
        assert!((s.cardinality_ratio() - 0.0002).abs() < 1e-12);
    }
}
