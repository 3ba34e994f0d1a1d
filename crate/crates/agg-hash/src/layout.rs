use agg_core::FRAME_HEADER;

use crate::error::HashError;

/// Bytes of one slot-table entry (a list pointer).
pub const SLOT_BYTES: usize = 8;
/// Bytes of linkage stored in front of each group in the list storage area.
pub const LINK_BYTES: usize = 8;

/// How a frame budget is split between slot table and list storage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableLayout {
    pub frame_size: usize,
    /// Frames granted to the table.
    pub frames: usize,
    pub slot_frames: usize,
    pub list_frames: usize,
    /// H.
    pub slots: usize,
    /// K, assuming every group occupies `group_bytes`.
    pub capacity: usize,
    pub group_bytes: usize,
    pub entries_per_frame: usize,
    /// Slot entry width, one more than [`SLOT_BYTES`] with bloom bytes.
    pub slot_bytes: usize,
    pub slot_ratio: f64,
    pub bloom: bool,
}

impl TableLayout {
    /// Picks the largest list storage area whose slot table still fits in
    /// `frames`.
    pub fn compute(
        frames: usize,
        frame_size: usize,
        group_bytes: usize,
        slot_ratio: f64,
        bloom: bool,
    ) -> Result<Self, HashError> {
        if frames < 2 {
            return Err(HashError::TooFewFrames(frames));
        }
        if !(slot_ratio > 0.0) {
            return Err(HashError::BadSlotRatio);
        }
        let slot_bytes = SLOT_BYTES + bloom as usize;
        let entries_per_frame = (frame_size - FRAME_HEADER) / (group_bytes + LINK_BYTES);
        let slots_per_frame = frame_size / slot_bytes;
        for list_frames in (1..frames).rev() {
            let capacity = list_frames * entries_per_frame;
            let slots = ((slot_ratio * capacity as f64).round() as usize).max(1);
            let slot_frames = slots.div_ceil(slots_per_frame);
            if list_frames + slot_frames <= frames {
                return Ok(Self {
                    frame_size,
                    frames,
                    slot_frames,
                    list_frames,
                    slots,
                    capacity,
                    group_bytes,
                    entries_per_frame,
                    slot_bytes,
                    slot_ratio,
                    bloom,
                });
            }
        }
        Err(HashError::TooFewFrames(frames))
    }

    /// Space overhead factor `o`: table bytes per stored group over group bytes,
    /// at full capacity.
    pub fn overhead(&self) -> f64 {
        (self.slot_bytes as f64 * self.slot_ratio + LINK_BYTES as f64 + self.group_bytes as f64) / self.group_bytes as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_page_and_ipv6_group() {
        let l = TableLayout::compute(100, 32768, 25, 1.0, false).unwrap();
        assert_eq!(l.entries_per_frame, 992);
        assert_eq!(l.list_frames + l.slot_frames, 100);
        assert_eq!(l.capacity, l.list_frames * 992);
        assert_eq!(l.slots, l.capacity);
        assert!((l.overhead() - 41.0 / 25.0).abs() < 1e-12);
    }

    #[test]
    fn two_frames_is_minimum() {
        let l = TableLayout::compute(2, 32768, 25, 1.0, true).unwrap();
        assert_eq!((l.list_frames, l.slot_frames), (1, 1));
        assert!(matches!(TableLayout::compute(1, 32768, 25, 1.0, false), Err(HashError::TooFewFrames(1))));
    }

    #[test]
    fn more_slots_fewer_lists() {
        let a = TableLayout::compute(64, 4096, 25, 1.0, false).unwrap();
        let b = TableLayout::compute(64, 4096, 25, 3.0, false).unwrap();
        assert!(b.list_frames < a.list_frames);
        assert!(b.slots >= 3 * b.capacity - 1);
    }
}
