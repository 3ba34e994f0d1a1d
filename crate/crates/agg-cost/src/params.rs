use agg_core::{DEFAULT_FRAME_SIZE, FRAME_HEADER};
use agg_hash::{TableLayout, LINK_BYTES, SLOT_BYTES};

use crate::error::ModelError;

/// System parameters a prediction depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct CostParameters {
    /// M, in frames.
    pub memory: usize,
    pub frame_size: usize,
    /// Bytes of one raw input record.
    pub input_bytes: usize,
    /// Bytes of one group record.
    pub group_bytes: usize,
    pub slot_ratio: f64,
    /// Fudge factor `f`; the planning factor is `F = o * f`.
    pub fudge: f64,
    /// Fixed bloom false-positive rate overriding the closed form.
    pub bloom_alpha: Option<f64>,
    /// The input is known to be in key order.
    pub sorted_input: bool,
}

impl CostParameters {
    pub fn new(memory: usize) -> Self {
        CostParameters {
            memory,
            frame_size: DEFAULT_FRAME_SIZE,
            input_bytes: 25,
            group_bytes: 25,
            slot_ratio: 1.0,
            fudge: 1.2,
            bloom_alpha: None,
            sorted_input: false,
        }
    }

    pub fn frame_size(mut self, p: usize) -> Self {
        self.frame_size = p;
        self
    }

    pub fn record_bytes(mut self, input: usize, group: usize) -> Self {
        self.input_bytes = input;
        self.group_bytes = group;
        self
    }

    pub fn slot_ratio(mut self, r: f64) -> Self {
        self.slot_ratio = r;
        self
    }

    pub fn fudge(mut self, f: f64) -> Self {
        self.fudge = f;
        self
    }

    pub fn sorted_input(mut self, on: bool) -> Self {
        self.sorted_input = on;
        self
    }

    pub fn bloom_alpha(mut self, a: f64) -> Self {
        self.bloom_alpha = Some(a);
        self
    }

    pub fn raw_per_frame(&self) -> f64 {
        ((self.frame_size - FRAME_HEADER) / self.input_bytes) as f64
    }

    pub fn groups_per_frame(&self) -> f64 {
        ((self.frame_size - FRAME_HEADER) / self.group_bytes) as f64
    }

    /// Hash table space overhead `o`.
    pub fn overhead(&self) -> f64 {
        (SLOT_BYTES as f64 * self.slot_ratio + LINK_BYTES as f64 + self.group_bytes as f64) / self.group_bytes as f64
    }

    /// `F = o * f`.
    pub fn planning_factor(&self) -> f64 {
        self.overhead() * self.fudge
    }

    pub fn layout(&self, frames: usize, bloom: bool) -> Result<TableLayout, ModelError> {
        Ok(TableLayout::compute(frames, self.frame_size, self.group_bytes, self.slot_ratio, bloom)?)
    }

    pub(crate) fn validate(&self) -> Result<(), ModelError> {
        if self.memory < 3 {
            return Err(ModelError::InvalidBudget(self.memory));
        }
        if self.input_bytes == 0 || self.group_bytes == 0 || self.frame_size <= FRAME_HEADER + self.input_bytes.max(self.group_bytes) {
            return Err(ModelError::Domain("a frame must hold at least one record".into()));
        }
        if !(self.fudge >= 1.0) || !(self.slot_ratio > 0.0) {
            return Err(ModelError::Domain("fudge must be >= 1 and slot ratio > 0".into()));
        }
        Ok(())
    }
}
