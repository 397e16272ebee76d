use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;

use super::config::{FilterConfig, Stage};
use super::report::{DropReason, DropSample, FilterReport, StageReport};
use super::rules::rule_based_filter;
use super::scorer::{check_score, Scorer, TextScorer};
use crate::corpus::ParallelRecord;
use crate::error::{Error, Result};
use crate::lang::LangCode;

pub type LangScorers = BTreeMap<LangCode, Arc<dyn TextScorer>>;

/// Scorers for stages 2-4. A stage that is enabled needs its scorer.
#[derive(Clone, Default)]
pub struct Scorers {
    pub language: Option<LangScorers>,
    pub semantic: Option<Arc<dyn Scorer>>,
    pub quality: Option<Arc<dyn Scorer>>,
}

impl Scorers {
    pub fn with_langid<S: TextScorer + 'static>(mut self, scorers: BTreeMap<LangCode, S>) -> Self {
        self.language = Some(scorers.into_iter().map(|(l, s)| (l, Arc::new(s) as Arc<dyn TextScorer>)).collect());
        self
    }
}

/// Shared driver: `score` returns None for bypassed records.
fn scored_stage<F>(records: &[ParallelRecord], stage: Stage, reason: DropReason, cfg: &FilterConfig, score: F) -> Result<(Vec<ParallelRecord>, StageReport)>
where
    F: Fn(&ParallelRecord) -> Result<Option<f64>> + Sync,
{
    cfg.validate()?;
    let threshold = cfg.threshold_for(stage);
    let scores: Vec<Option<f64>> = records.par_iter().map(&score).collect::<Result<_>>()?;
    let mut report = StageReport::new(stage, true, records.len());
    let mut kept = Vec::with_capacity(records.len());
    for (index, (r, s)) in records.iter().zip(scores).enumerate() {
        match s {
            None => {
                report.bypassed += 1;
                kept.push(r.clone());
            }
            Some(s) if s >= threshold => kept.push(r.clone()),
            Some(s) => report.record_drop(DropSample { index, src: r.src.clone(), tgt: r.tgt.clone(), reason, score: Some(s) }, cfg.max_samples),
        }
    }
    report.check()?;
    Ok((kept, report))
}

/// Stage 2: both sides must look like their labelled language. Skip-listed
/// languages bypass their own side's check.
pub fn language_detection_filter(records: &[ParallelRecord], scorers: &LangScorers, cfg: &FilterConfig) -> Result<(Vec<ParallelRecord>, StageReport)> {
    let stage = Stage::LanguageDetection;
    for r in records {
        for lang in [&r.src_lang, &r.tgt_lang] {
            if !cfg.skipped(stage, lang) && !scorers.contains_key(lang) {
                return Err(Error::config(format!("no language-ID scorer for {lang} and it is not skip-listed")));
            }
        }
    }
    scored_stage(records, stage, DropReason::LanguageId, cfg, |r| {
        let mut worst: Option<f64> = None;
        for (text, lang) in [(&r.src, &r.src_lang), (&r.tgt, &r.tgt_lang)] {
            if cfg.skipped(stage, lang) {
                continue;
            }
            let s = &scorers[lang];
            let v = check_score(s.name(), s.score(text)?)?;
            worst = Some(worst.map_or(v, |w| w.min(v)));
        }
        Ok(worst)
    })
}

fn pair_skipped(cfg: &FilterConfig, stage: Stage, r: &ParallelRecord) -> bool {
    cfg.skipped(stage, &r.src_lang) || cfg.skipped(stage, &r.tgt_lang)
}

/// Stage 3: cross-lingual similarity. Pairs the scorer cannot embed bypass.
pub fn semantic_filter(records: &[ParallelRecord], scorer: &dyn Scorer, cfg: &FilterConfig) -> Result<(Vec<ParallelRecord>, StageReport)> {
    let stage = Stage::Semantic;
    let before = scorer.warnings();
    let (kept, mut report) = scored_stage(records, stage, DropReason::Semantic, cfg, |r| {
        if pair_skipped(cfg, stage, r) || !scorer.supports(&r.src_lang) || !scorer.supports(&r.tgt_lang) {
            return Ok(None);
        }
        Ok(Some(check_score(scorer.name(), scorer.score(r)?)?))
    })?;
    report.warnings = scorer.warnings() - before;
    Ok((kept, report))
}

/// Stage 4: reference-free quality estimate. Unsupported languages must be skip-listed.
pub fn quality_estimation_filter(records: &[ParallelRecord], scorer: &dyn Scorer, cfg: &FilterConfig) -> Result<(Vec<ParallelRecord>, StageReport)> {
    let stage = Stage::QualityEstimation;
    for r in records {
        if !pair_skipped(cfg, stage, r) {
            for lang in [&r.src_lang, &r.tgt_lang] {
                if !scorer.supports(lang) {
                    return Err(Error::config(format!("QE scorer {} does not support {lang} and it is not skip-listed", scorer.name())));
                }
            }
        }
    }
    scored_stage(records, stage, DropReason::QualityEstimation, cfg, |r| {
        if pair_skipped(cfg, stage, r) {
            return Ok(None);
        }
        Ok(Some(check_score(scorer.name(), scorer.score(r)?)?))
    })
}

fn missing(stage: Stage) -> Error {
    Error::config(format!("stage {stage} is enabled but no scorer was supplied"))
}

/// Runs the enabled stages in order: rules, language ID, semantic, QE.
pub fn run_pipeline(records: &[ParallelRecord], cfg: &FilterConfig, scorers: &Scorers) -> Result<(Vec<ParallelRecord>, FilterReport)> {
    cfg.validate()?;
    let mut current = records.to_vec();
    let mut stages = Vec::new();
    for stage in Stage::ALL {
        if !cfg.stages.enabled(stage) {
            stages.push(StageReport::new(stage, false, current.len()));
            continue;
        }
        let (kept, report) = match stage {
            Stage::RuleBased => rule_based_filter(&current, cfg)?,
            Stage::LanguageDetection => language_detection_filter(&current, scorers.language.as_ref().ok_or_else(|| missing(stage))?, cfg)?,
            Stage::Semantic => semantic_filter(&current, scorers.semantic.as_deref().ok_or_else(|| missing(stage))?, cfg)?,
            Stage::QualityEstimation => quality_estimation_filter(&current, scorers.quality.as_deref().ok_or_else(|| missing(stage))?, cfg)?,
        };
        current = kept;
        stages.push(report);
    }
    let report = FilterReport { input: records.len(), output: current.len(), stages, config_fingerprint: cfg.fingerprint() };
    report.check()?;
    Ok((current, report))
}
