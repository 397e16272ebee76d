use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::eval::translate_records;
use crate::corpus::{downsample, ParallelRecord};
use crate::error::{Error, Result};
use crate::filter::{run_pipeline, FilterConfig, FilterReport, Scorers};
use crate::model::{SearchConfig, TranslationModel, Vocab};
use crate::numerics::Scalar;

pub const KD_ORIGIN: &str = "kd";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistillConfig {
    /// Path of the teacher checkpoint; resolved by the caller.
    pub teacher: Option<String>,
    pub beam_size: usize,
    pub max_len: usize,
    /// Sources translated per direction; None translates all.
    pub max_per_direction: Option<usize>,
    pub refilter: bool,
    pub seed: u64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        DistillConfig { teacher: None, beam_size: 3, max_len: 200, max_per_direction: None, refilter: true, seed: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistillReport {
    pub authentic: usize,
    pub generated: usize,
    pub dropped_exact_match: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterReport>,
    pub kept_synthetic: usize,
    pub total: usize,
}

/// Sequence-level distillation data: the teacher's beam output for each
/// authentic source, minus pairs whose target exactly matches any authentic
/// target, optionally re-filtered, appended to the authentic data.
pub fn distill<T: Scalar>(
    teacher: &TranslationModel<T>,
    student_vocab: &Vocab,
    authentic: &[ParallelRecord],
    cfg: &DistillConfig,
    refilter: Option<(&FilterConfig, &Scorers)>,
) -> Result<(Vec<ParallelRecord>, DistillReport)> {
    if teacher.vocab() != student_vocab {
        return Err(Error::invalid("teacher and student vocabularies differ"));
    }
    if cfg.beam_size == 0 || cfg.max_len == 0 {
        return Err(Error::config("distillation needs beam_size and max_len >= 1"));
    }
    let sources = match cfg.max_per_direction {
        Some(cap) => downsample(authentic, cap, cfg.seed),
        None => authentic.to_vec(),
    };
    let search = SearchConfig { beam_size: cfg.beam_size, max_len: cfg.max_len, length_penalty: 1.0 };
    let outputs = translate_records(teacher, &sources, &search)?;
    let authentic_targets: HashSet<&str> = authentic.iter().map(|r| r.tgt.trim()).collect();
    let generated = outputs.len();
    let mut synthetic = Vec::new();
    for (r, out) in sources.iter().zip(outputs) {
        if !authentic_targets.contains(out.trim()) {
            synthetic.push(ParallelRecord::new(r.src_lang.clone(), r.tgt_lang.clone(), &r.src, &out, KD_ORIGIN));
        }
    }
    let dropped_exact_match = generated - synthetic.len();
    let filter = match (cfg.refilter, refilter) {
        (false, _) => None,
        (true, Some((fc, scorers))) => {
            let (kept, rep) = run_pipeline(&synthetic, fc, scorers)?;
            synthetic = kept;
            Some(rep)
        }
        (true, None) => return Err(Error::config("refilter is on but no filter configuration was supplied")),
    };
    let kept_synthetic = synthetic.len();
    let mut all = authentic.to_vec();
    all.extend(synthetic);
    let report = DistillReport { authentic: authentic.len(), generated, dropped_exact_match, filter, kept_synthetic, total: all.len() };
    Ok((all, report))
}

/// Targets shared by the synthetic part of `combined` and `authentic`.
pub fn kd_overlap<'a>(combined: &'a [ParallelRecord], authentic: &[ParallelRecord]) -> Vec<&'a str> {
    let auth: HashSet<&str> = authentic.iter().map(|r| r.tgt.trim()).collect();
    combined.iter().filter(|r| r.origin == KD_ORIGIN && auth.contains(r.tgt.trim())).map(|r| r.tgt.as_str()).collect()
}

/// Fraction of sources for which the teacher reproduces the authentic target.
pub fn reproduction_rate<T: Scalar>(teacher: &TranslationModel<T>, authentic: &[ParallelRecord], search: &SearchConfig) -> Result<f64> {
    if authentic.is_empty() {
        return Ok(0.0);
    }
    let outs = translate_records(teacher, authentic, search)?;
    let hits = authentic.iter().zip(&outs).filter(|(r, o)| r.tgt.trim() == o.trim()).count();
    Ok(hits as f64 / authentic.len() as f64)
}

/// Per-direction counts, for reports.
pub fn count_synthetic(records: &[ParallelRecord]) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for r in records.iter().filter(|r| r.origin == KD_ORIGIN) {
        *m.entry(r.direction().to_string()).or_default() += 1;
    }
    m
}
