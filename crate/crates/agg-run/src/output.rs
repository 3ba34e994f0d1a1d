use std::time::Instant;

use agg_core::{Frame, FrameKind, Metrics};

use crate::error::RunError;

/// Packs final groups into output frames and forwards each one to a sink.
///
/// Output frames are counted only in the all-inclusive write total. The
/// first emitted group stamps the time-to-first-result. The buffer frame is
/// supplied by the caller so that it can be charged to the budget.
pub struct OutputWriter<'a> {
    frame: Frame,
    start: Instant,
    sink: &'a mut dyn FnMut(&[u8], &[u8]),
}

impl<'a> OutputWriter<'a> {
    pub fn new(frame: Frame, start: Instant, sink: &'a mut dyn FnMut(&[u8], &[u8])) -> Self {
        Self { frame, start, sink }
    }

    /// Hands the buffer frame back.
    pub fn into_frame(self) -> Frame {
        self.frame
    }

    pub fn emit(&mut self, key: &[u8], state: &[u8], m: &mut Metrics) -> Result<(), RunError> {
        if m.time_to_first_result.is_none() {
            m.time_to_first_result = Some(self.start.elapsed());
        }
        m.output_groups += 1;
        let fields = state.len() / agg_core::FIELD_BYTES;
        if !self.frame.accepts(FrameKind::Group, fields) {
            self.flush(m);
        }
        if self.frame.is_empty() {
            self.frame.reset(FrameKind::Group, fields);
        }
        if self.frame.push(key, state).is_err() {
            self.flush(m);
            self.frame.reset(FrameKind::Group, fields);
            self.frame.push(key, state)?;
        }
        (self.sink)(key, state);
        Ok(())
    }

    fn flush(&mut self, m: &mut Metrics) {
        if !self.frame.is_empty() {
            m.output_write();
            self.frame.reset(FrameKind::Group, self.frame.fields());
        }
    }

    pub fn finish(&mut self, m: &mut Metrics) {
        self.flush(m);
    }
}
