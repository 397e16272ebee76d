use serde::{Deserialize, Serialize};

use super::ngram::{order_stats, OrderStats};
use super::tokenize::word_tokens;
use super::{check_lengths, MetricScore};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChrfConfig {
    pub char_ngram_max: usize,
    pub word_ngram_max: usize,
    pub beta: f64,
    pub whitespace_stripped_for_char_ngrams: bool,
}

impl Default for ChrfConfig {
    fn default() -> Self {
        ChrfConfig { char_ngram_max: 6, word_ngram_max: 2, beta: 2.0, whitespace_stripped_for_char_ngrams: true }
    }
}

impl ChrfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.char_ngram_max == 0 && self.word_ngram_max == 0 {
            return Err(Error::config("chrF needs at least one n-gram order"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::config(format!("chrF beta must be positive, got {}", self.beta)));
        }
        Ok(())
    }

    pub fn fingerprint(&self) -> String {
        format!("chrF|c{}|w{}|b{}|{}", self.char_ngram_max, self.word_ngram_max, self.beta, if self.whitespace_stripped_for_char_ngrams { "nows" } else { "ws" })
    }
}

/// Character orders first, then word orders.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChrfStats(pub Vec<OrderStats>);

impl ChrfStats {
    pub fn segment(hyp: &str, reference: &str, cfg: &ChrfConfig) -> Self {
        let chars = |s: &str| -> Vec<char> {
            if cfg.whitespace_stripped_for_char_ngrams {
                s.chars().filter(|c| !c.is_whitespace()).collect()
            } else {
                s.chars().collect()
            }
        };
        let (hc, rc) = (chars(hyp), chars(reference));
        let (hw, rw) = (word_tokens(hyp), word_tokens(reference));
        let mut v = Vec::with_capacity(cfg.char_ngram_max + cfg.word_ngram_max);
        v.extend((1..=cfg.char_ngram_max).map(|n| order_stats(&hc, &rc, n)));
        v.extend((1..=cfg.word_ngram_max).map(|n| order_stats(&hw, &rw, n)));
        ChrfStats(v)
    }

    pub fn add(&mut self, o: &ChrfStats) {
        for (a, b) in self.0.iter_mut().zip(&o.0) {
            a.add(b);
        }
    }

    /// Order-averaged precision and recall over orders with reference mass,
    /// combined into F-beta and scaled to 0..100.
    pub fn score(&self, beta: f64) -> f64 {
        let used: Vec<&OrderStats> = self.0.iter().filter(|o| o.ref_total > 0).collect();
        if used.is_empty() {
            return 0.0;
        }
        let k = used.len() as f64;
        let p = used.iter().map(|o| if o.hyp_total > 0 { o.matches as f64 / o.hyp_total as f64 } else { 0.0 }).sum::<f64>() / k;
        let r = used.iter().map(|o| o.matches as f64 / o.ref_total as f64).sum::<f64>() / k;
        if p + r == 0.0 {
            return 0.0;
        }
        let b2 = beta * beta;
        100.0 * (1.0 + b2) * p * r / (b2 * p + r)
    }
}

/// Corpus-level chrF++.
pub fn chrf_pp<S: AsRef<str>>(hypotheses: &[S], references: &[S], cfg: &ChrfConfig) -> Result<MetricScore> {
    cfg.validate()?;
    check_lengths(hypotheses.len(), references.len())?;
    let mut total = ChrfStats(vec![OrderStats::default(); cfg.char_ngram_max + cfg.word_ngram_max]);
    for (h, r) in hypotheses.iter().zip(references) {
        total.add(&ChrfStats::segment(h.as_ref(), r.as_ref(), cfg));
    }
    Ok(MetricScore { metric: "chrF++".into(), value: total.score(cfg.beta), config_fingerprint: cfg.fingerprint(), segment_count: hypotheses.len(), warnings: Vec::new() })
}

/// Segment-level chrF++ by the same formula.
pub fn sentence_chrf_pp(hypothesis: &str, reference: &str, cfg: &ChrfConfig) -> f64 {
    ChrfStats::segment(hypothesis, reference, cfg).score(cfg.beta)
}
