/// Tournament tree over `k` sources storing the loser at each internal node.
///
/// The caller supplies `beats(i, j)`, which must treat exhausted sources as
/// losing to everything. Each replay walks one leaf-to-root path, so a pop
/// costs at most `ceil(log2 k)` calls.
#[derive(Debug, Clone)]
pub struct LoserTree {
    k: usize,
    nodes: Vec<usize>,
}

impl LoserTree {
    pub fn new(k: usize, beats: &mut impl FnMut(usize, usize) -> bool) -> Self {
        assert!(k > 0);
        let mut t = Self { k, nodes: vec![usize::MAX; k.max(1)] };
        let w = t.init(1, beats);
        t.nodes[0] = w;
        t
    }

    fn init(&mut self, node: usize, beats: &mut impl FnMut(usize, usize) -> bool) -> usize {
        if node >= self.k {
            return node - self.k;
        }
        let a = self.init(2 * node, beats);
        let b = self.init(2 * node + 1, beats);
        let (w, l) = if beats(b, a) { (b, a) } else { (a, b) };
        self.nodes[node] = l;
        w
    }

    pub fn winner(&self) -> usize {
        self.nodes[0]
    }

    /// Re-runs the matches on the path of the last winner after its source
    /// advanced.
    pub fn replay(&mut self, beats: &mut impl FnMut(usize, usize) -> bool) {
        let mut w = self.nodes[0];
        let mut node = (w + self.k) / 2;
        while node >= 1 {
            let l = self.nodes[node];
            if beats(l, w) {
                self.nodes[node] = w;
                w = l;
            }
            node /= 2;
        }
        self.nodes[0] = w;
    }

    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn drain(lists: Vec<Vec<u32>>) -> (Vec<u32>, u64, usize) {
        let k = lists.len();
        let mut pos = vec![0usize; k];
        let mut cmps = 0u64;
        let head = |pos: &Vec<usize>, i: usize| lists[i].get(pos[i]).copied();
        let mut out = vec![];
        let beats = |pos: &Vec<usize>, a: usize, b: usize, c: &mut u64| match (head(pos, a), head(pos, b)) {
            (None, _) => false,
            (_, None) => true,
            (Some(x), Some(y)) => {
                *c += 1;
                x < y || (x == y && a < b)
            }
        };
        let mut tree = {
            let p = pos.clone();
            LoserTree::new(k, &mut |a, b| beats(&p, a, b, &mut cmps))
        };
        let mut worst = 0usize;
        loop {
            let w = tree.winner();
            let Some(v) = head(&pos, w) else { break };
            out.push(v);
            pos[w] += 1;
            let before = cmps;
            let p = pos.clone();
            tree.replay(&mut |a, b| beats(&p, a, b, &mut cmps));
            worst = worst.max((cmps - before) as usize);
        }
        (out, cmps, worst)
    }

    #[test]
    fn single_source() {
        let (out, cmps, _) = drain(vec![vec![1, 2, 3]]);
        assert_eq!(out, vec![1, 2, 3]);
        assert_eq!(cmps, 0);
    }

    proptest! {
        #[test]
        fn merges_sorted_lists(mut lists in proptest::collection::vec(proptest::collection::vec(0u32..100, 0..20), 1..12)) {
            for l in lists.iter_mut() { l.sort(); }
            let mut expect: Vec<u32> = lists.iter().flatten().copied().collect();
            expect.sort();
            let k = lists.len();
            let (out, _, worst) = drain(lists);
            prop_assert_eq!(out, expect);
            let bound = (k as f64).log2().ceil() as usize;
            prop_assert!(worst <= bound);
        }
    }
}
