use crate::frame::FrameKind;
use crate::record;
use crate::FIELD_BYTES;

/// A bounded-state aggregate function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggregateFunction {
    Sum,
    Count,
    Avg,
    Min,
    Max,
}

/// Accumulator of one aggregate. AVG is carried as sum and count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AggState {
    Sum(f64),
    Count(u64),
    Avg { sum: f64, count: u64 },
    Min(f64),
    Max(f64),
}

impl AggregateFunction {
    pub fn words(self) -> usize {
        match self {
            AggregateFunction::Avg => 2,
            _ => 1,
        }
    }

    pub fn init(self, payload: f64) -> AggState {
        match self {
            AggregateFunction::Sum => AggState::Sum(payload),
            AggregateFunction::Count => AggState::Count(1),
            AggregateFunction::Avg => AggState::Avg { sum: payload, count: 1 },
            AggregateFunction::Min => AggState::Min(payload),
            AggregateFunction::Max => AggState::Max(payload),
        }
    }

    pub fn step(self, state: AggState, payload: f64) -> AggState {
        self.merge(state, self.init(payload))
    }

    pub fn merge(self, a: AggState, b: AggState) -> AggState {
        match (a, b) {
            (AggState::Sum(x), AggState::Sum(y)) => AggState::Sum(x + y),
            (AggState::Count(x), AggState::Count(y)) => AggState::Count(x + y),
            (AggState::Avg { sum: s1, count: c1 }, AggState::Avg { sum: s2, count: c2 }) => {
                AggState::Avg { sum: s1 + s2, count: c1 + c2 }
            }
            (AggState::Min(x), AggState::Min(y)) => AggState::Min(x.min(y)),
            (AggState::Max(x), AggState::Max(y)) => AggState::Max(x.max(y)),
            (a, b) => panic!("mismatched aggregate states {a:?} and {b:?}"),
        }
    }

    pub fn finish(self, state: AggState) -> f64 {
        match state {
            AggState::Sum(v) | AggState::Min(v) | AggState::Max(v) => v,
            AggState::Count(c) => c as f64,
            AggState::Avg { sum, count } => sum / count as f64,
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "sum" => Some(Self::Sum),
            "count" => Some(Self::Count),
            "avg" | "average" => Some(Self::Avg),
            "min" => Some(Self::Min),
            "max" => Some(Self::Max),
            _ => None,
        }
    }
}

/// Folds one payload into a state.
pub fn apply_aggregate(f: AggregateFunction, state: AggState, payload: f64) -> AggState {
    f.step(state, payload)
}

impl AggState {
    pub fn function(&self) -> AggregateFunction {
        match self {
            AggState::Sum(_) => AggregateFunction::Sum,
            AggState::Count(_) => AggregateFunction::Count,
            AggState::Avg { .. } => AggregateFunction::Avg,
            AggState::Min(_) => AggregateFunction::Min,
            AggState::Max(_) => AggregateFunction::Max,
        }
    }

    pub fn words(&self) -> usize {
        self.function().words()
    }

    pub fn encode(&self, out: &mut Vec<u8>) {
        match *self {
            AggState::Sum(v) | AggState::Min(v) | AggState::Max(v) => out.extend_from_slice(&v.to_le_bytes()),
            AggState::Count(c) => out.extend_from_slice(&c.to_le_bytes()),
            AggState::Avg { sum, count } => {
                out.extend_from_slice(&sum.to_le_bytes());
                out.extend_from_slice(&count.to_le_bytes());
            }
        }
    }

    fn decode(f: AggregateFunction, b: &[u8]) -> AggState {
        let w0 = u64::from_le_bytes(b[..8].try_into().unwrap());
        match f {
            AggregateFunction::Sum => AggState::Sum(f64::from_bits(w0)),
            AggregateFunction::Count => AggState::Count(w0),
            AggregateFunction::Min => AggState::Min(f64::from_bits(w0)),
            AggregateFunction::Max => AggState::Max(f64::from_bits(w0)),
            AggregateFunction::Avg => AggState::Avg {
                sum: f64::from_bits(w0),
                count: u64::from_le_bytes(b[8..16].try_into().unwrap()),
            },
        }
    }
}

/// The aggregate list of one query; fixes the group-state width.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggSpec {
    funcs: Vec<AggregateFunction>,
    words: usize,
}

impl AggSpec {
    pub fn new(funcs: Vec<AggregateFunction>) -> Self {
        assert!(!funcs.is_empty(), "at least one aggregate is required");
        let words = funcs.iter().map(|f| f.words()).sum();
        assert!(words <= u8::MAX as usize);
        Self { funcs, words }
    }

    pub fn sum() -> Self {
        Self::new(vec![AggregateFunction::Sum])
    }

    pub fn functions(&self) -> &[AggregateFunction] {
        &self.funcs
    }

    /// Numeric fields in a group record.
    pub fn words(&self) -> usize {
        self.words
    }

    pub fn state_bytes(&self) -> usize {
        self.words * FIELD_BYTES
    }

    pub fn group_record_len(&self, key_len: usize) -> usize {
        record::encoded_len(key_len, self.words)
    }

    pub fn decode(&self, bytes: &[u8]) -> Vec<AggState> {
        let mut at = 0;
        self.funcs
            .iter()
            .map(|&f| {
                let s = AggState::decode(f, &bytes[at..]);
                at += f.words() * FIELD_BYTES;
                s
            })
            .collect()
    }

    pub fn encode(&self, states: &[AggState], out: &mut Vec<u8>) {
        for s in states {
            s.encode(out);
        }
    }

    /// Writes the initial state for `payload` into `out`.
    pub fn init_into(&self, payload: f64, out: &mut [u8]) {
        let mut at = 0;
        for &f in &self.funcs {
            let mut v = Vec::with_capacity(16);
            f.init(payload).encode(&mut v);
            out[at..at + v.len()].copy_from_slice(&v);
            at += v.len();
        }
    }

    /// Folds `payload` into the encoded state in place.
    pub fn step_in_place(&self, state: &mut [u8], payload: f64) {
        let mut at = 0;
        for &f in &self.funcs {
            match f {
                AggregateFunction::Sum => add_f64(&mut state[at..], payload),
                AggregateFunction::Count => add_u64(&mut state[at..], 1),
                AggregateFunction::Avg => {
                    add_f64(&mut state[at..], payload);
                    add_u64(&mut state[at + 8..], 1);
                }
                AggregateFunction::Min => set_f64(&mut state[at..], |x| x.min(payload)),
                AggregateFunction::Max => set_f64(&mut state[at..], |x| x.max(payload)),
            }
            at += f.words() * FIELD_BYTES;
        }
    }

    /// Merges the encoded state `other` into `state` in place.
    pub fn merge_in_place(&self, state: &mut [u8], other: &[u8]) {
        let mut at = 0;
        for &f in &self.funcs {
            let o = f64::from_le_bytes(other[at..at + 8].try_into().unwrap());
            let ou = u64::from_le_bytes(other[at..at + 8].try_into().unwrap());
            match f {
                AggregateFunction::Sum => add_f64(&mut state[at..], o),
                AggregateFunction::Count => add_u64(&mut state[at..], ou),
                AggregateFunction::Avg => {
                    add_f64(&mut state[at..], o);
                    let c = u64::from_le_bytes(other[at + 8..at + 16].try_into().unwrap());
                    add_u64(&mut state[at + 8..], c);
                }
                AggregateFunction::Min => set_f64(&mut state[at..], |x| x.min(o)),
                AggregateFunction::Max => set_f64(&mut state[at..], |x| x.max(o)),
            }
            at += f.words() * FIELD_BYTES;
        }
    }

    /// Seeds a fresh state from a record's fields: raw payloads are
    /// initialised, group states copied.
    pub fn seed_from(&self, kind: FrameKind, rec_fields: &[u8], out: &mut [u8]) {
        match kind {
            FrameKind::Raw => self.init_into(f64::from_le_bytes(rec_fields[..8].try_into().unwrap()), out),
            FrameKind::Group => out.copy_from_slice(&rec_fields[..self.state_bytes()]),
        }
    }

    /// Folds a record's fields into an existing state.
    pub fn absorb(&self, kind: FrameKind, state: &mut [u8], rec_fields: &[u8]) {
        match kind {
            FrameKind::Raw => self.step_in_place(state, f64::from_le_bytes(rec_fields[..8].try_into().unwrap())),
            FrameKind::Group => self.merge_in_place(state, rec_fields),
        }
    }

    /// Final values, one per aggregate.
    pub fn finish(&self, state: &[u8]) -> Vec<f64> {
        self.decode(state).into_iter().zip(&self.funcs).map(|(s, f)| f.finish(s)).collect()
    }
}

#[inline]
fn add_f64(b: &mut [u8], v: f64) {
    let x = f64::from_le_bytes(b[..8].try_into().unwrap());
    b[..8].copy_from_slice(&(x + v).to_le_bytes());
}

#[inline]
fn add_u64(b: &mut [u8], v: u64) {
    let x = u64::from_le_bytes(b[..8].try_into().unwrap());
    b[..8].copy_from_slice(&(x + v).to_le_bytes());
}

#[inline]
fn set_f64(b: &mut [u8], f: impl FnOnce(f64) -> f64) {
    let x = f64::from_le_bytes(b[..8].try_into().unwrap());
    b[..8].copy_from_slice(&f(x).to_le_bytes());
}
