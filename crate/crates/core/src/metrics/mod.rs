//! Corpus BLEU and chrF++.

pub mod bleu;
pub mod chrf;
mod ngram;
pub mod tokenize;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bleu::{bleu, BleuConfig, Smoothing};
pub use chrf::{chrf_pp, sentence_chrf_pp, ChrfConfig};
pub use ngram::OrderStats;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricScore {
    pub metric: String,
    /// In `[0, 100]`.
    pub value: f64,
    pub config_fingerprint: String,
    pub segment_count: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn check_lengths(h: usize, r: usize) -> Result<()> {
    if h != r {
        return Err(Error::invalid(format!("{h} hypotheses but {r} references")));
    }
    if h == 0 {
        return Err(Error::invalid("metric needs at least one segment"));
    }
    Ok(())
}
