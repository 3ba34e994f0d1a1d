use std::fmt;
use std::rc::Rc;

use crate::alloc::Pool;
use crate::error::CoreError;
use crate::record;

/// Bytes reserved at the start of every frame: record count (u32), kind (u8),
/// fields per record (u8), two pad bytes.
pub const FRAME_HEADER: usize = 8;

/// What the records of a frame hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum FrameKind {
    /// Input records: key plus payload.
    Raw = 0,
    /// Partially or fully aggregated groups: key plus state.
    Group = 1,
}

impl FrameKind {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(FrameKind::Raw),
            1 => Some(FrameKind::Group),
            _ => None,
        }
    }
}

/// A fixed-size page holding length-prefixed records. Records never straddle
/// frames.
pub struct Frame {
    buf: Box<[u8]>,
    used: usize,
    lease: Option<Rc<Pool>>,
}

impl fmt::Debug for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Frame")
            .field("size", &self.buf.len())
            .field("used", &self.used)
            .field("count", &self.count())
            .field("kind", &self.kind())
            .finish()
    }
}

impl Drop for Frame {
    fn drop(&mut self) {
        if let Some(pool) = self.lease.take() {
            pool.release();
        }
    }
}

impl Frame {
    /// A frame not charged to any budget.
    pub fn new(size: usize) -> Self {
        let mut f = Frame { buf: vec![0u8; size].into_boxed_slice(), used: FRAME_HEADER, lease: None };
        f.reset(FrameKind::Raw, 1);
        f
    }

    pub(crate) fn leased(size: usize, pool: Rc<Pool>) -> Self {
        let mut f = Frame::new(size);
        f.lease = Some(pool);
        f
    }

    pub fn size(&self) -> usize {
        self.buf.len()
    }

    pub fn used(&self) -> usize {
        self.used
    }

    pub fn free(&self) -> usize {
        self.buf.len() - self.used
    }

    pub fn count(&self) -> u32 {
        u32::from_le_bytes(self.buf[0..4].try_into().unwrap())
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn kind(&self) -> FrameKind {
        FrameKind::from_u8(self.buf[4]).unwrap_or(FrameKind::Raw)
    }

    /// Numeric fields per record.
    pub fn fields(&self) -> usize {
        self.buf[5] as usize
    }

    /// Empties the frame and stamps a new record layout.
    pub fn reset(&mut self, kind: FrameKind, fields: usize) {
        assert!(fields <= u8::MAX as usize);
        self.buf[0..4].copy_from_slice(&0u32.to_le_bytes());
        self.buf[4] = kind as u8;
        self.buf[5] = fields as u8;
        self.buf[6] = 0;
        self.buf[7] = 0;
        self.used = FRAME_HEADER;
    }

    /// True when an empty frame could be stamped, or the layout already matches.
    pub fn accepts(&self, kind: FrameKind, fields: usize) -> bool {
        self.is_empty() || (self.kind() == kind && self.fields() == fields)
    }

    /// Appends `key` followed by the raw field bytes.
    pub fn push(&mut self, key: &[u8], field_bytes: &[u8]) -> Result<(), CoreError> {
        record::validate_key(key)?;
        if field_bytes.len() != self.fields() * crate::FIELD_BYTES {
            return Err(CoreError::InvalidRecord("field width does not match frame layout"));
        }
        let needed = record::encoded_len(key.len(), self.fields());
        if needed > self.free() {
            return Err(CoreError::FrameFull { needed, free: self.free() });
        }
        let at = self.used;
        record::encode_into(&mut self.buf[at..at + needed], key, field_bytes);
        self.used += needed;
        self.bump_count();
        Ok(())
    }

    /// Appends an already encoded record.
    pub fn push_encoded(&mut self, rec: &[u8]) -> Result<(), CoreError> {
        if rec.len() > self.free() {
            return Err(CoreError::FrameFull { needed: rec.len(), free: self.free() });
        }
        let at = self.used;
        self.buf[at..at + rec.len()].copy_from_slice(rec);
        self.used += rec.len();
        self.bump_count();
        Ok(())
    }

    fn bump_count(&mut self) {
        let c = self.count() + 1;
        self.buf[0..4].copy_from_slice(&c.to_le_bytes());
    }

    pub fn records(&self) -> Records<'_> {
        Records { buf: &self.buf[..self.used], pos: FRAME_HEADER, left: self.count(), fields: self.fields() }
    }

    pub fn bytes(&self) -> &[u8] {
        &self.buf
    }

    /// Raw buffer access. Call [`Frame::resync`] after writing into it.
    pub fn bytes_mut(&mut self) -> &mut [u8] {
        &mut self.buf
    }

    /// Recomputes the occupied length from the header after the buffer was
    /// filled externally (e.g. read from disk).
    pub fn resync(&mut self) -> Result<(), CoreError> {
        if FrameKind::from_u8(self.buf[4]).is_none() {
            return Err(CoreError::Corrupt(format!("unknown frame kind {}", self.buf[4])));
        }
        let fields = self.fields();
        let mut pos = FRAME_HEADER;
        for _ in 0..self.count() {
            if pos + 2 > self.buf.len() {
                return Err(CoreError::Corrupt("record header past frame end".into()));
            }
            let len = record::record_len(&self.buf[pos..], fields);
            if pos + len > self.buf.len() {
                return Err(CoreError::Corrupt("record past frame end".into()));
            }
            pos += len;
        }
        self.used = pos;
        Ok(())
    }

    /// Overwrites the used region (header included) with `data`.
    pub fn load(&mut self, data: &[u8]) -> Result<(), CoreError> {
        if data.len() > self.buf.len() || data.len() < FRAME_HEADER {
            return Err(CoreError::Corrupt("frame image has wrong length".into()));
        }
        self.buf[..data.len()].copy_from_slice(data);
        self.resync()
    }
}

/// Iterator over the encoded records of a frame.
pub struct Records<'a> {
    buf: &'a [u8],
    pos: usize,
    left: u32,
    fields: usize,
}

impl<'a> Iterator for Records<'a> {
    type Item = &'a [u8];

    fn next(&mut self) -> Option<&'a [u8]> {
        if self.left == 0 {
            return None;
        }
        let len = record::record_len(&self.buf[self.pos..], self.fields);
        let rec = &self.buf[self.pos..self.pos + len];
        self.pos += len;
        self.left -= 1;
        Some(rec)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.left as usize, Some(self.left as usize))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_and_iterate() {
        let mut f = Frame::new(64);
        f.push(b"ab", &1.5f64.to_le_bytes()).unwrap();
        f.push(b"c", &2.0f64.to_le_bytes()).unwrap();
        let recs: Vec<_> = f.records().map(|r| record::key(r).to_vec()).collect();
        assert_eq!(recs, vec![b"ab".to_vec(), b"c".to_vec()]);
        assert_eq!(f.used(), FRAME_HEADER + 12 + 11);
    }

    #[test]
    fn record_one_byte_too_large() {
        let mut f = Frame::new(64);
        let key = vec![b'k'; f.free() - 2 - 8 + 1];
        assert!(matches!(f.push(&key, &[0u8; 8]), Err(CoreError::FrameFull { .. })));
        let key = vec![b'k'; f.free() - 2 - 8];
        f.push(&key, &[0u8; 8]).unwrap();
        assert_eq!(f.free(), 0);
    }

    #[test]
    fn load_round_trip() {
        let mut f = Frame::new(128);
        f.reset(FrameKind::Group, 2);
        f.push(b"xyz", &[7u8; 16]).unwrap();
        let mut g = Frame::new(128);
        g.load(f.bytes()).unwrap();
        assert_eq!(g.used(), f.used());
        assert_eq!(g.kind(), FrameKind::Group);
        assert_eq!(g.records().next().unwrap(), f.records().next().unwrap());
    }
}
