use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::Stage;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    Empty,
    MinLength,
    MaxLength,
    LengthRatio,
    Duplicate,
    LanguageId,
    Semantic,
    QualityEstimation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DropSample {
    /// Position in the stage's input.
    pub index: usize,
    pub src: String,
    pub tgt: String,
    pub reason: DropReason,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: Stage,
    pub enabled: bool,
    pub input: usize,
    pub kept: usize,
    pub dropped: BTreeMap<DropReason, usize>,
    /// Records altered in place (HTML stripping only).
    pub modified: usize,
    /// Records that bypassed the stage through the skip list or lack of scorer support.
    pub bypassed: usize,
    /// Zero-vector embeddings and similar soft failures.
    pub warnings: usize,
    pub samples: Vec<DropSample>,
}

impl StageReport {
    pub(crate) fn new(stage: Stage, enabled: bool, input: usize) -> Self {
        StageReport { stage, enabled, input, kept: input, dropped: BTreeMap::new(), modified: 0, bypassed: 0, warnings: 0, samples: Vec::new() }
    }

    pub(crate) fn record_drop(&mut self, sample: DropSample, max_samples: usize) {
        *self.dropped.entry(sample.reason).or_default() += 1;
        self.kept -= 1;
        if self.samples.len() < max_samples {
            self.samples.push(sample);
        }
    }

    pub fn total_dropped(&self) -> usize {
        self.dropped.values().sum()
    }

    /// input = kept + sum of drops.
    pub fn check(&self) -> Result<()> {
        if self.input != self.kept + self.total_dropped() {
            return Err(Error::invalid(format!("stage {}: counts do not telescope ({} in, {} kept, {} dropped)", self.stage, self.input, self.kept, self.total_dropped())));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub input: usize,
    pub output: usize,
    pub stages: Vec<StageReport>,
    pub config_fingerprint: String,
}

impl FilterReport {
    pub fn stage(&self, stage: Stage) -> Option<&StageReport> {
        self.stages.iter().find(|s| s.stage == stage)
    }

    pub fn dropped(&self, reason: DropReason) -> usize {
        self.stages.iter().filter_map(|s| s.dropped.get(&reason)).sum()
    }

    /// Per-stage telescoping plus chaining of stage outputs into inputs.
    pub fn check(&self) -> Result<()> {
        let mut n = self.input;
        for s in &self.stages {
            s.check()?;
            if s.input != n {
                return Err(Error::invalid(format!("stage {} received {} records, previous stage emitted {n}", s.stage, s.input)));
            }
            n = s.kept;
        }
        if n != self.output {
            return Err(Error::invalid(format!("report output {} disagrees with last stage ({n})", self.output)));
        }
        Ok(())
    }
}
