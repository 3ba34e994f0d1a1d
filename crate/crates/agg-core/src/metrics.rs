use std::time::Duration;

/// Instrumentation shared by all operators.
///
/// `frames_written` and `frames_read` leave out the input scan and the final
/// output flush; the `_total` counters include them.
#[derive(Debug, Clone, Default)]
pub struct Metrics {
    /// Key comparisons in sorting, merging and hash chain walks.
    pub comparisons: u64,
    /// Equality checks made while folding adjacent records into groups.
    pub grouping_checks: u64,
    pub frames_written: u64,
    pub frames_read: u64,
    pub frames_written_total: u64,
    pub frames_read_total: u64,
    pub runs_created: u64,
    pub fallbacks: u64,
    pub grace_partitionings: u64,
    pub max_level: u32,
    pub bloom_skips: u64,
    pub output_groups: u64,
    pub time_to_first_result: Option<Duration>,
    pub total_time: Duration,
}

impl Metrics {
    pub fn spill_write(&mut self) {
        self.frames_written += 1;
        self.frames_written_total += 1;
    }

    pub fn spill_read(&mut self) {
        self.frames_read += 1;
        self.frames_read_total += 1;
    }

    pub fn input_read(&mut self) {
        self.frames_read_total += 1;
    }

    pub fn output_write(&mut self) {
        self.frames_written_total += 1;
    }

    /// Every deterministic counter, for rerun comparisons.
    pub fn counters(&self) -> [u64; 12] {
        [
            self.comparisons,
            self.grouping_checks,
            self.frames_written,
            self.frames_read,
            self.frames_written_total,
            self.frames_read_total,
            self.runs_created,
            self.fallbacks,
            self.grace_partitionings,
            self.max_level as u64,
            self.bloom_skips,
            self.output_groups,
        ]
    }
}
