use std::collections::HashMap;
use std::hash::Hash;

/// Clipped n-gram match counts for one order, additive over segments.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OrderStats {
    pub matches: usize,
    pub hyp_total: usize,
    pub ref_total: usize,
}

impl OrderStats {
    pub fn add(&mut self, o: &OrderStats) {
        self.matches += o.matches;
        self.hyp_total += o.hyp_total;
        self.ref_total += o.ref_total;
    }
}

fn counts<T: Eq + Hash>(seq: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut m = HashMap::new();
    if seq.len() >= n {
        for w in seq.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

pub fn order_stats<T: Eq + Hash>(hyp: &[T], reference: &[T], n: usize) -> OrderStats {
    let h = counts(hyp, n);
    let r = counts(reference, n);
    let matches = h.iter().map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0))).sum();
    OrderStats { matches, hyp_total: (hyp.len() + 1).saturating_sub(n), ref_total: (reference.len() + 1).saturating_sub(n) }
}
