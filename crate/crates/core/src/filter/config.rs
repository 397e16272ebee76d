use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lang::LangCode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    RuleBased,
    LanguageDetection,
    Semantic,
    QualityEstimation,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::RuleBased, Stage::LanguageDetection, Stage::Semantic, Stage::QualityEstimation];
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::RuleBased => "rule_based",
            Stage::LanguageDetection => "language_detection",
            Stage::Semantic => "semantic",
            Stage::QualityEstimation => "quality_estimation",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageToggles {
    pub rule_based: bool,
    pub language_detection: bool,
    pub semantic: bool,
    pub quality_estimation: bool,
}

impl Default for StageToggles {
    fn default() -> Self {
        StageToggles { rule_based: true, language_detection: true, semantic: true, quality_estimation: true }
    }
}

impl StageToggles {
    pub fn none() -> Self {
        StageToggles { rule_based: false, language_detection: false, semantic: false, quality_estimation: false }
    }

    pub fn enabled(&self, stage: Stage) -> bool {
        match stage {
            Stage::RuleBased => self.rule_based,
            Stage::LanguageDetection => self.language_detection,
            Stage::Semantic => self.semantic,
            Stage::QualityEstimation => self.quality_estimation,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    /// Lengths are Unicode scalar values after NFC.
    pub min_chars: usize,
    pub max_chars: usize,
    /// Applied as max(len)/min(len), so symmetric in direction.
    pub max_length_ratio: f64,
    /// Keep iff score >= threshold, for the three scored stages.
    pub threshold: f64,
    pub stage_thresholds: BTreeMap<Stage, f64>,
    /// Languages whose side (stage 2) or pair (stages 3, 4) bypasses a stage.
    pub skip_languages: BTreeMap<Stage, BTreeSet<LangCode>>,
    pub stages: StageToggles,
    /// Dropped-record samples kept per stage in the report.
    pub max_samples: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            min_chars: 3,
            max_chars: 200,
            max_length_ratio: 2.0,
            threshold: 0.6,
            stage_thresholds: BTreeMap::new(),
            skip_languages: BTreeMap::new(),
            stages: StageToggles::default(),
            max_samples: 10,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_chars == 0 || self.min_chars > self.max_chars {
            return Err(Error::config(format!("need 0 < min_chars <= max_chars, got {} and {}", self.min_chars, self.max_chars)));
        }
        if self.max_length_ratio.is_nan() || self.max_length_ratio <= 1.0 {
            return Err(Error::config(format!("max_length_ratio must exceed 1, got {}", self.max_length_ratio)));
        }
        for (name, t) in std::iter::once(("threshold".to_string(), self.threshold)).chain(self.stage_thresholds.iter().map(|(s, &t)| (format!("stage_thresholds.{s}"), t))) {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::config(format!("{name} must lie in [0, 1], got {t}")));
            }
        }
        if self.stage_thresholds.contains_key(&Stage::RuleBased) {
            return Err(Error::config("the rule-based stage has no threshold"));
        }
        Ok(())
    }

    pub fn threshold_for(&self, stage: Stage) -> f64 {
        self.stage_thresholds.get(&stage).copied().unwrap_or(self.threshold)
    }

    pub fn skipped(&self, stage: Stage, lang: &LangCode) -> bool {
        self.skip_languages.get(&stage).is_some_and(|s| s.contains(lang))
    }

    /// sha256 of the canonical JSON form plus the cosine mapping in use.
    pub fn fingerprint(&self) -> String {
        #[derive(Serialize)]
        struct Tagged<'a> {
            config: &'a FilterConfig,
            cosine_mapping: &'static str,
        }
        crate::util::json_fingerprint(&Tagged { config: self, cosine_mapping: "(1+cos)/2" }).expect("config serializes")
    }
}
