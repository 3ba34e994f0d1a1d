use agg_core::{record, AggSpec, FrameKind, Metrics};

/// Folds a key-sorted stream into one group per key, keeping only the
/// current running group in memory.
#[derive(Debug, Default)]
pub struct Grouper {
    key: Vec<u8>,
    state: Vec<u8>,
    active: bool,
}

impl Grouper {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feeds one record; emits the previous group when the key changes.
    pub fn feed<E, F>(
        &mut self,
        aggs: &AggSpec,
        kind: FrameKind,
        rec: &[u8],
        m: &mut Metrics,
        emit: &mut F,
    ) -> Result<(), E>
    where
        F: FnMut(&[u8], &[u8], &mut Metrics) -> Result<(), E> + ?Sized,
    {
        let key = record::key(rec);
        let fields = record::fields(rec);
        if self.active {
            m.grouping_checks += 1;
            if self.key == key {
                aggs.absorb(kind, &mut self.state, fields);
                return Ok(());
            }
            emit(&self.key, &self.state, m)?;
        }
        self.key.clear();
        self.key.extend_from_slice(key);
        self.state.resize(aggs.state_bytes(), 0);
        aggs.seed_from(kind, fields, &mut self.state);
        self.active = true;
        Ok(())
    }

    /// Emits the last running group, if any.
    pub fn finish<E, F>(&mut self, m: &mut Metrics, emit: &mut F) -> Result<(), E>
    where
        F: FnMut(&[u8], &[u8], &mut Metrics) -> Result<(), E> + ?Sized,
    {
        if self.active {
            self.active = false;
            emit(&self.key, &self.state, m)?;
        }
        Ok(())
    }
}

/// Groups a sorted stream of `(kind, encoded record)` pairs.
pub fn pipelined_group<'a, E>(
    stream: impl IntoIterator<Item = (FrameKind, &'a [u8])>,
    aggs: &AggSpec,
    m: &mut Metrics,
    mut emit: impl FnMut(&[u8], &[u8], &mut Metrics) -> Result<(), E>,
) -> Result<(), E> {
    let mut g = Grouper::new();
    for (kind, rec) in stream {
        g.feed(aggs, kind, rec, m, &mut emit)?;
    }
    g.finish(m, &mut emit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    fn raw(key: &str, v: f64) -> Vec<u8> {
        let mut out = Vec::new();
        record::encode(key.as_bytes(), &v.to_le_bytes(), &mut out);
        out
    }

    fn run(recs: &[Vec<u8>]) -> Vec<(String, f64)> {
        let aggs = AggSpec::sum();
        let mut out = vec![];
        let mut m = Metrics::default();
        pipelined_group(recs.iter().map(|r| (FrameKind::Raw, &r[..])), &aggs, &mut m, |k, s, _| {
            out.push((String::from_utf8(k.to_vec()).unwrap(), aggs.finish(s)[0]));
            Ok::<_, Infallible>(())
        })
        .unwrap();
        out
    }

    #[test]
    fn folds_neighbours() {
        let recs = vec![raw("a", 1.0), raw("a", 2.0), raw("b", 5.0)];
        assert_eq!(run(&recs), vec![("a".into(), 3.0), ("b".into(), 5.0)]);
    }

    #[test]
    fn one_key_many_times() {
        let recs: Vec<_> = (1..=100).map(|i| raw("k", i as f64)).collect();
        assert_eq!(run(&recs), vec![("k".into(), 5050.0)]);
    }
}
