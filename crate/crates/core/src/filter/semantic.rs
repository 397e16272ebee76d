use std::collections::{BTreeSet, HashMap};

use super::scorer::Embedder;
use crate::corpus::ParallelRecord;
use crate::error::{Error, Result};
use crate::lang::LangCode;

const MAX_ORDER: usize = 3;
const BOUNDARY: &str = "\u{1}";

/// Word 1-3-grams tagged with their order, with sentence boundary markers on
/// the higher orders.
fn features(text: &str) -> Vec<(usize, String)> {
    let words: Vec<String> = text.split_whitespace().map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase()).filter(|w| !w.is_empty()).collect();
    if words.is_empty() {
        return Vec::new();
    }
    let mut out: Vec<(usize, String)> = words.iter().map(|w| (1, w.clone())).collect();
    let mut padded = vec![BOUNDARY.to_string()];
    padded.extend(words);
    padded.push(BOUNDARY.to_string());
    for n in 2..=MAX_ORDER {
        out.extend(padded.windows(n).map(|w| (n, w.join(" "))));
    }
    out
}

/// (language, (n-gram order, n-gram)) to sparse PPMI row.
type NgramRows = HashMap<(LangCode, (usize, String)), Vec<(usize, f64)>>;

/// Cross-lingual embedder learned from aligned pairs with a pivot language.
/// A word n-gram of any language maps to its positive PMI with each pivot
/// n-gram of the same order it co-occurs with across pairs. A sentence is the
/// sum over its known n-grams, centered on its language's mean training
/// sentence.
#[derive(Clone, Debug)]
pub struct PivotEmbedder {
    pivot: LangCode,
    dim: usize,
    rows: NgramRows,
    means: HashMap<LangCode, Vec<f64>>,
}

impl PivotEmbedder {
    /// Learns from every record with the pivot language on one side.
    pub fn train(records: &[ParallelRecord], pivot: &LangCode) -> Result<Self> {
        let mut index: HashMap<(usize, String), usize> = HashMap::new();
        let mut order_of: Vec<usize> = Vec::new();
        let mut cooc: HashMap<(LangCode, (usize, String)), HashMap<usize, f64>> = HashMap::new();
        let mut pivot_counts: HashMap<usize, f64> = HashMap::new();
        for r in records {
            let (pivot_text, other_lang, other_text) = if &r.src_lang == pivot {
                (&r.src, &r.tgt_lang, &r.tgt)
            } else if &r.tgt_lang == pivot {
                (&r.tgt, &r.src_lang, &r.src)
            } else {
                continue;
            };
            let ids: Vec<usize> = features(pivot_text)
                .into_iter()
                .map(|f| {
                    let n = index.len();
                    *index.entry(f).or_insert_with_key(|f| {
                        order_of.push(f.0);
                        n
                    })
                })
                .collect();
            for &p in &ids {
                *pivot_counts.entry(p).or_default() += 1.0;
            }
            for (lang, text) in [(pivot, pivot_text), (other_lang, other_text)] {
                for f in features(text) {
                    let order = f.0;
                    let row = cooc.entry((lang.clone(), f)).or_default();
                    for &p in ids.iter().filter(|&&p| order_of[p] == order) {
                        *row.entry(p).or_default() += 1.0;
                    }
                }
            }
        }
        if index.is_empty() {
            return Err(Error::invalid(format!("no records with pivot language {pivot} to train the embedder on")));
        }
        let mut totals = [0.0; MAX_ORDER + 1];
        for (&p, &c) in &pivot_counts {
            totals[order_of[p]] += c;
        }
        let mut background = vec![0.0; index.len()];
        for (&p, &c) in &pivot_counts {
            background[p] = c / totals[order_of[p]];
        }
        let background = &background;
        let rows = cooc
            .into_iter()
            .filter(|(_, row)| !row.is_empty())
            .map(|(key, row)| {
                let z: f64 = row.values().sum();
                let mut sparse: Vec<(usize, f64)> = row.into_iter().map(|(p, c)| (p, (c / z / background[p]).ln())).filter(|&(_, w)| w > 0.0).collect();
                sparse.sort_by_key(|&(p, _)| p);
                (key, sparse)
            })
            .collect();
        let mut emb = PivotEmbedder { pivot: pivot.clone(), dim: index.len(), rows, means: HashMap::new() };
        let mut sums: HashMap<LangCode, (Vec<f64>, f64)> = HashMap::new();
        for r in records.iter().filter(|r| &r.src_lang == pivot || &r.tgt_lang == pivot) {
            for (lang, text) in [(&r.src_lang, &r.src), (&r.tgt_lang, &r.tgt)] {
                let v = emb.raw(text, lang);
                let (sum, n) = sums.entry(lang.clone()).or_insert_with(|| (vec![0.0; emb.dim], 0.0));
                sum.iter_mut().zip(&v).for_each(|(s, x)| *s += x);
                *n += 1.0;
            }
        }
        emb.means = sums.into_iter().map(|(l, (sum, n))| (l, sum.into_iter().map(|s| s / n).collect())).collect();
        Ok(emb)
    }

    pub fn pivot(&self) -> &LangCode {
        &self.pivot
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn languages(&self) -> BTreeSet<&LangCode> {
        self.means.keys().collect()
    }

    fn raw(&self, text: &str, lang: &LangCode) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        let mut key = (lang.clone(), (0, String::new()));
        for f in features(text) {
            key.1 = f;
            if let Some(row) = self.rows.get(&key) {
                for &(p, x) in row {
                    out[p] += x;
                }
            }
        }
        out
    }
}

impl Embedder for PivotEmbedder {
    fn name(&self) -> &str {
        "pivot-cooccurrence"
    }

    fn supports(&self, lang: &LangCode) -> bool {
        self.means.contains_key(lang)
    }

    fn embed(&self, text: &str, lang: &LangCode) -> Result<Vec<f64>> {
        let mean = self.means.get(lang).ok_or_else(|| Error::Scorer { scorer: self.name().into(), message: format!("no training data for {lang}") })?;
        let mut v = self.raw(text, lang);
        if v.iter().all(|&x| x == 0.0) {
            // nothing known: keep the zero vector so the caller can flag it
            return Ok(v);
        }
        v.iter_mut().zip(mean).for_each(|(x, m)| *x -= m);
        Ok(v)
    }
}
