//! Wire format: 2-byte little-endian key length, key bytes, then fixed-width
//! 8-byte little-endian numeric fields.

use crate::aggregate::{AggSpec, AggState};
use crate::error::CoreError;
use crate::frame::{Frame, FrameKind};
use crate::FIELD_BYTES;

pub const LEN_PREFIX: usize = 2;

pub fn encoded_len(key_len: usize, fields: usize) -> usize {
    LEN_PREFIX + key_len + fields * FIELD_BYTES
}

pub fn validate_key(key: &[u8]) -> Result<(), CoreError> {
    if key.is_empty() {
        return Err(CoreError::InvalidRecord("empty grouping key"));
    }
    if key.len() > u16::MAX as usize {
        return Err(CoreError::InvalidRecord("grouping key longer than 65535 bytes"));
    }
    Ok(())
}

pub(crate) fn encode_into(out: &mut [u8], key: &[u8], field_bytes: &[u8]) {
    out[..2].copy_from_slice(&(key.len() as u16).to_le_bytes());
    out[2..2 + key.len()].copy_from_slice(key);
    out[2 + key.len()..].copy_from_slice(field_bytes);
}

/// Appends an encoded record to `out`.
pub fn encode(key: &[u8], field_bytes: &[u8], out: &mut Vec<u8>) {
    out.extend_from_slice(&(key.len() as u16).to_le_bytes());
    out.extend_from_slice(key);
    out.extend_from_slice(field_bytes);
}

#[inline]
pub fn key_len(rec: &[u8]) -> usize {
    u16::from_le_bytes([rec[0], rec[1]]) as usize
}

/// Length of the record starting at `buf[0]`.
#[inline]
pub fn record_len(buf: &[u8], fields: usize) -> usize {
    encoded_len(key_len(buf), fields)
}

#[inline]
pub fn key(rec: &[u8]) -> &[u8] {
    &rec[LEN_PREFIX..LEN_PREFIX + key_len(rec)]
}

#[inline]
pub fn fields(rec: &[u8]) -> &[u8] {
    &rec[LEN_PREFIX + key_len(rec)..]
}

/// First numeric field interpreted as an `f64` payload.
#[inline]
pub fn payload(rec: &[u8]) -> f64 {
    let f = fields(rec);
    f64::from_le_bytes(f[..8].try_into().unwrap())
}

/// An input tuple: grouping key plus one numeric payload.
#[derive(Debug, Clone, PartialEq)]
pub struct InputRecord {
    pub key: Vec<u8>,
    pub payload: f64,
}

impl InputRecord {
    pub fn new(key: impl Into<Vec<u8>>, payload: f64) -> Self {
        Self { key: key.into(), payload }
    }

    pub fn encoded_len(&self) -> usize {
        encoded_len(self.key.len(), 1)
    }

    pub fn write_to(&self, frame: &mut Frame) -> Result<(), CoreError> {
        if !frame.accepts(FrameKind::Raw, 1) {
            return Err(CoreError::InvalidRecord("frame holds a different record layout"));
        }
        if frame.is_empty() {
            frame.reset(FrameKind::Raw, 1);
        }
        frame.push(&self.key, &self.payload.to_le_bytes())
    }

    pub fn decode(rec: &[u8]) -> Self {
        Self { key: key(rec).to_vec(), payload: payload(rec) }
    }
}

/// A grouping key and its bounded aggregation state.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupRecord {
    pub key: Vec<u8>,
    pub state: Vec<AggState>,
}

impl GroupRecord {
    pub fn encoded_len(&self) -> usize {
        encoded_len(self.key.len(), self.state.iter().map(|s| s.words()).sum())
    }
}

/// Serializes `rec` into `frame`, stamping an empty frame as a group frame.
pub fn serialize_record(rec: &GroupRecord, frame: &mut Frame) -> Result<(), CoreError> {
    validate_key(&rec.key)?;
    let words: usize = rec.state.iter().map(|s| s.words()).sum();
    if !frame.accepts(FrameKind::Group, words) {
        return Err(CoreError::InvalidRecord("frame holds a different record layout"));
    }
    if frame.is_empty() {
        frame.reset(FrameKind::Group, words);
    }
    let mut bytes = Vec::with_capacity(words * FIELD_BYTES);
    for s in &rec.state {
        s.encode(&mut bytes);
    }
    frame.push(&rec.key, &bytes)
}

/// Decodes one encoded group record according to `aggs`.
pub fn deserialize_record(rec: &[u8], aggs: &AggSpec) -> Result<GroupRecord, CoreError> {
    if rec.len() < LEN_PREFIX || rec.len() != encoded_len(key_len(rec), aggs.words()) {
        return Err(CoreError::InvalidRecord("record length does not match aggregate layout"));
    }
    let k = key(rec);
    validate_key(k)?;
    Ok(GroupRecord { key: k.to_vec(), state: aggs.decode(fields(rec)) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregate::AggregateFunction;
    use proptest::prelude::*;

    #[test]
    fn sum_group_round_trip() {
        let aggs = AggSpec::new(vec![AggregateFunction::Sum]);
        let rec = GroupRecord { key: b"a".to_vec(), state: vec![AggState::Sum(4.0)] };
        let mut f = Frame::new(64);
        serialize_record(&rec, &mut f).unwrap();
        let back = deserialize_record(f.records().next().unwrap(), &aggs).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn empty_key_rejected() {
        let rec = GroupRecord { key: vec![], state: vec![AggState::Count(1)] };
        let mut f = Frame::new(64);
        assert!(matches!(serialize_record(&rec, &mut f), Err(CoreError::InvalidRecord(_))));
        assert!(matches!(InputRecord::new(vec![], 1.0).write_to(&mut f), Err(CoreError::InvalidRecord(_))));
    }

    #[test]
    fn oversize_group_is_frame_full() {
        let mut f = Frame::new(64);
        let free = f.free();
        let rec = GroupRecord { key: vec![b'z'; free - 2 - 8 + 1], state: vec![AggState::Sum(0.0)] };
        assert!(matches!(serialize_record(&rec, &mut f), Err(CoreError::FrameFull { .. })));
    }

    fn any_state() -> impl Strategy<Value = AggState> {
        prop_oneof![
            any::<f64>().prop_filter("nan", |v| !v.is_nan()).prop_map(AggState::Sum),
            any::<u64>().prop_map(AggState::Count),
            (any::<i32>(), any::<u64>()).prop_map(|(s, c)| AggState::Avg { sum: s as f64, count: c }),
            any::<i32>().prop_map(|v| AggState::Min(v as f64)),
            any::<i32>().prop_map(|v| AggState::Max(v as f64)),
        ]
    }

    proptest! {
        #[test]
        fn round_trip_is_byte_exact(key in proptest::collection::vec(any::<u8>(), 1..40),
                                    state in proptest::collection::vec(any_state(), 1..5)) {
            let funcs: Vec<_> = state.iter().map(|s| s.function()).collect();
            let aggs = AggSpec::new(funcs);
            let rec = GroupRecord { key, state };
            let mut f = Frame::new(512);
            serialize_record(&rec, &mut f).unwrap();
            let bytes = f.records().next().unwrap().to_vec();
            let back = deserialize_record(&bytes, &aggs).unwrap();
            prop_assert_eq!(&back, &rec);
            let mut g = Frame::new(512);
            serialize_record(&back, &mut g).unwrap();
            prop_assert_eq!(g.records().next().unwrap(), &bytes[..]);
        }
    }
}
