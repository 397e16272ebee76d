use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;

use unicode_normalization::UnicodeNormalization;

use super::scorer::TextScorer;
use crate::error::{Error, Result};
use crate::lang::LangCode;

pub const MIN_SEED_SENTENCES: usize = 50;
const MAX_ORDER: usize = 3;

fn ngrams(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.nfc().collect();
    let mut out = Vec::new();
    for n in 1..=MAX_ORDER {
        out.extend(chars.windows(n).map(|w| w.iter().collect::<String>()));
    }
    out
}

/// Multinomial Naive Bayes over character 1-3-grams, add-one smoothing,
/// uniform prior.
#[derive(Clone, Debug)]
pub struct LangIdModel {
    languages: Vec<LangCode>,
    counts: Vec<HashMap<String, u64>>,
    totals: Vec<u64>,
    vocab_size: usize,
}

impl LangIdModel {
    pub fn languages(&self) -> &[LangCode] {
        &self.languages
    }

    /// Posterior over the trained languages, in `languages()` order.
    pub fn posterior(&self, text: &str) -> Vec<f64> {
        let grams = ngrams(text);
        let v = (self.vocab_size + 1) as f64;
        let log_lik: Vec<f64> = self
            .counts
            .iter()
            .zip(&self.totals)
            .map(|(c, &total)| {
                let denom = (total as f64 + v).ln();
                grams.iter().map(|g| (*c.get(g).unwrap_or(&0) as f64 + 1.0).ln() - denom).sum()
            })
            .collect();
        let max = log_lik.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = log_lik.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = exp.iter().sum();
        exp.into_iter().map(|e| e / z).collect()
    }

    pub fn score(&self, text: &str, lang: &LangCode) -> Option<f64> {
        let i = self.languages.iter().position(|l| l == lang)?;
        Some(self.posterior(text)[i])
    }

    pub fn predict(&self, text: &str) -> &LangCode {
        let p = self.posterior(text);
        let best = (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b]).then(b.cmp(&a))).expect("at least one language");
        &self.languages[best]
    }
}

/// Posterior of one fixed language.
#[derive(Clone, Debug)]
pub struct LangIdScorer {
    model: Arc<LangIdModel>,
    lang: LangCode,
    name: String,
}

impl LangIdScorer {
    pub fn lang(&self) -> &LangCode {
        &self.lang
    }

    pub fn model(&self) -> &LangIdModel {
        &self.model
    }
}

impl TextScorer for LangIdScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&self, text: &str) -> Result<f64> {
        Ok(self.model.score(text, &self.lang).expect("scorer language is in the model"))
    }
}

/// Trains one shared model and returns a scorer per language.
pub fn train_langid<S: AsRef<str>>(seed: &BTreeMap<LangCode, Vec<S>>) -> Result<BTreeMap<LangCode, LangIdScorer>> {
    if seed.is_empty() {
        return Err(Error::invalid("language ID needs at least one language"));
    }
    let mut counts = Vec::new();
    let mut totals = Vec::new();
    let mut vocab = HashSet::new();
    for (lang, sentences) in seed {
        if sentences.len() < MIN_SEED_SENTENCES {
            return Err(Error::invalid(format!("{lang}: {} seed sentences, need at least {MIN_SEED_SENTENCES}", sentences.len())));
        }
        let mut c: HashMap<String, u64> = HashMap::new();
        let mut total = 0;
        for s in sentences {
            for g in ngrams(s.as_ref()) {
                total += 1;
                *c.entry(g).or_default() += 1;
            }
        }
        vocab.extend(c.keys().cloned());
        counts.push(c);
        totals.push(total);
    }
    let model = Arc::new(LangIdModel { languages: seed.keys().cloned().collect(), counts, totals, vocab_size: vocab.len() });
    Ok(seed.keys().map(|l| (l.clone(), LangIdScorer { model: Arc::clone(&model), lang: l.clone(), name: format!("langid[{l}]") })).collect())
}
