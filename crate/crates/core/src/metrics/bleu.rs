use serde::{Deserialize, Serialize};

use super::ngram::{order_stats, OrderStats};
use super::tokenize::word_tokens;
use super::{check_lengths, MetricScore};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Smoothing {
    None,
    Exponential,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BleuConfig {
    pub max_ngram: usize,
    pub smoothing: Smoothing,
}

impl Default for BleuConfig {
    fn default() -> Self {
        BleuConfig { max_ngram: 4, smoothing: Smoothing::Exponential }
    }
}

impl BleuConfig {
    pub fn fingerprint(&self) -> String {
        let s = match self.smoothing {
            Smoothing::None => "none",
            Smoothing::Exponential => "exp",
        };
        format!("BLEU|n{}|s:{s}|tok:punct", self.max_ngram)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BleuStats {
    pub orders: Vec<OrderStats>,
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl BleuStats {
    pub fn segment(hyp: &str, reference: &str, max_ngram: usize) -> Self {
        let (h, r) = (word_tokens(hyp), word_tokens(reference));
        BleuStats { orders: (1..=max_ngram).map(|n| order_stats(&h, &r, n)).collect(), hyp_len: h.len(), ref_len: r.len() }
    }

    pub fn add(&mut self, o: &BleuStats) {
        for (a, b) in self.orders.iter_mut().zip(&o.orders) {
            a.add(b);
        }
        self.hyp_len += o.hyp_len;
        self.ref_len += o.ref_len;
    }

    /// BLEU on 0..100. With exponential smoothing the k-th zero-match order
    /// contributes `1 / (2^k * total)`; an order with no hypothesis n-grams
    /// at all uses a denominator of 1.
    pub fn score(&self, smoothing: Smoothing) -> f64 {
        if self.hyp_len == 0 {
            return 0.0;
        }
        let mut zero_orders = 0;
        let mut log_sum = 0.0;
        for o in &self.orders {
            let p = if o.matches == 0 {
                match smoothing {
                    Smoothing::None => return 0.0,
                    Smoothing::Exponential => {
                        zero_orders += 1;
                        1.0 / (2f64.powi(zero_orders) * o.hyp_total.max(1) as f64)
                    }
                }
            } else {
                o.matches as f64 / o.hyp_total as f64
            };
            log_sum += p.ln();
        }
        let (c, r) = (self.hyp_len as f64, self.ref_len as f64);
        let bp = if c >= r { 1.0 } else { (1.0 - r / c).exp() };
        100.0 * bp * (log_sum / self.orders.len() as f64).exp()
    }
}

/// Corpus-level BLEU against a single reference per segment.
pub fn bleu<S: AsRef<str>>(hypotheses: &[S], references: &[S], cfg: &BleuConfig) -> Result<MetricScore> {
    if cfg.max_ngram == 0 {
        return Err(Error::config("BLEU max_ngram must be at least 1"));
    }
    check_lengths(hypotheses.len(), references.len())?;
    let mut total = BleuStats { orders: vec![OrderStats::default(); cfg.max_ngram], hyp_len: 0, ref_len: 0 };
    for (h, r) in hypotheses.iter().zip(references) {
        total.add(&BleuStats::segment(h.as_ref(), r.as_ref(), cfg.max_ngram));
    }
    let mut warnings = Vec::new();
    if total.hyp_len == 0 {
        warnings.push("all hypotheses are empty; BLEU is 0".to_string());
    }
    Ok(MetricScore { metric: "BLEU".into(), value: total.score(cfg.smoothing), config_fingerprint: cfg.fingerprint(), segment_count: hypotheses.len(), warnings })
}
