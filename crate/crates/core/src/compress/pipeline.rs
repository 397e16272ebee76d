use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::distill::{distill, DistillConfig, DistillReport};
use super::eval::mean_chrf;
use super::prune::{prune, PruneConfig, PruneReport};
use super::train::{train, TrainConfig, TrainLog};
use crate::corpus::ParallelRecord;
use crate::error::Result;
use crate::filter::{FilterConfig, Scorers};
use crate::model::checkpoint::{checkpoint_bytes, fingerprint, storage_bytes};
use crate::model::{quantize_fp16, SearchConfig, TranslationModel};
use crate::numerics::Scalar;
use crate::util::atomic_write;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompressionConfig {
    pub stage1: TrainConfig,
    pub prune: PruneConfig,
    /// Post-pruning fine-tuning; one epoch by default.
    pub stage3: TrainConfig,
    pub distill: DistillConfig,
    /// Train on KD-augmented data in stage 1 / stage 3 when a teacher is given.
    pub kd_stage1: bool,
    pub kd_stage3: bool,
    pub quantize: bool,
    /// Decoding for the dev chrF++ recorded in each stage manifest.
    pub dev_search: SearchConfig,
}

impl Default for CompressionConfig {
    fn default() -> Self {
        CompressionConfig {
            stage1: TrainConfig::default(),
            prune: PruneConfig::default(),
            stage3: TrainConfig { max_epochs: 1, ..TrainConfig::default() },
            distill: DistillConfig::default(),
            kd_stage1: true,
            kd_stage3: true,
            quantize: true,
            dev_search: SearchConfig { beam_size: 3, max_len: 200, length_penalty: 1.0 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage: usize,
    pub name: String,
    pub checkpoint: PathBuf,
    pub fingerprint: String,
    pub parent_fingerprint: String,
    pub config: serde_json::Value,
    pub parameter_count: usize,
    pub storage_bytes: usize,
    pub dev_chrf: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_log: Option<TrainLog>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prune_report: Option<PruneReport>,
}

pub struct PipelineInputs<'a, T> {
    pub baseline: &'a TranslationModel<T>,
    pub train: &'a [ParallelRecord],
    pub dev: &'a [ParallelRecord],
    pub teacher: Option<&'a TranslationModel<T>>,
    pub refilter: Option<(&'a FilterConfig, &'a Scorers)>,
}

pub struct CompressionOutcome<T> {
    pub stages: Vec<StageManifest>,
    pub distill_report: Option<DistillReport>,
    pub models: Vec<TranslationModel<T>>,
}

struct Writer<'a> {
    dir: &'a Path,
    parent: String,
    stages: Vec<StageManifest>,
}

impl Writer<'_> {
    #[allow(clippy::too_many_arguments)]
    fn emit<T: Scalar>(
        &mut self,
        name: &str,
        model: &TranslationModel<T>,
        config: serde_json::Value,
        dev_chrf: f64,
        train_log: Option<TrainLog>,
        prune_report: Option<PruneReport>,
    ) -> Result<()> {
        let stage = self.stages.len() + 1;
        let file = PathBuf::from(format!("stage{stage}_{name}.ckpt"));
        let mut meta = BTreeMap::new();
        meta.insert("stage".to_string(), serde_json::json!(stage));
        meta.insert("name".to_string(), serde_json::json!(name));
        meta.insert("parent_fingerprint".to_string(), serde_json::json!(self.parent));
        let bytes = checkpoint_bytes(model, &meta)?;
        let fp = fingerprint(&bytes);
        atomic_write(&self.dir.join(&file), &bytes)?;
        let manifest = StageManifest {
            stage,
            name: name.to_string(),
            checkpoint: file,
            fingerprint: fp.clone(),
            parent_fingerprint: std::mem::replace(&mut self.parent, fp),
            config,
            parameter_count: model.parameter_count(),
            storage_bytes: storage_bytes(model),
            dev_chrf,
            train_log,
            prune_report,
        };
        atomic_write(&self.dir.join(format!("stage{stage}_{name}.json")), &serde_json::to_vec_pretty(&manifest)?)?;
        self.stages.push(manifest);
        Ok(())
    }
}

/// Stage 1 fine-tune, stage 2 prune, stage 3 fine-tune (one epoch by
/// default), stage 4 fp16. Each stage writes a checkpoint and a manifest
/// whose parent is the previous stage's fingerprint (the baseline for stage 1).
pub fn run_compression_pipeline<T: Scalar>(inputs: &PipelineInputs<'_, T>, cfg: &CompressionConfig, out_dir: &Path) -> Result<CompressionOutcome<T>> {
    cfg.stage1.validate()?;
    cfg.stage3.validate()?;
    cfg.prune.validate(inputs.baseline)?;
    std::fs::create_dir_all(out_dir)?;
    let baseline_fp = fingerprint(&checkpoint_bytes(inputs.baseline, &BTreeMap::new())?);
    let mut w = Writer { dir: out_dir, parent: baseline_fp, stages: Vec::new() };

    let mut distill_report = None;
    let kd_train = match inputs.teacher {
        Some(teacher) => {
            let (data, rep) = distill(teacher, inputs.baseline.vocab(), inputs.train, &cfg.distill, inputs.refilter)?;
            distill_report = Some(rep);
            Some(data)
        }
        None => None,
    };
    let pick = |use_kd: bool| match (&kd_train, use_kd) {
        (Some(kd), true) => kd.as_slice(),
        _ => inputs.train,
    };
    let score = |m: &TranslationModel<T>| mean_chrf(m, inputs.dev, &cfg.dev_search);

    let (m1, log1) = train(inputs.baseline, pick(cfg.kd_stage1), inputs.dev, &cfg.stage1)?;
    w.emit("finetune", &m1, serde_json::to_value(&cfg.stage1)?, score(&m1)?, Some(log1), None)?;

    let (m2, report) = prune(&m1, &cfg.prune, inputs.dev)?;
    w.emit("prune", &m2, serde_json::to_value(&cfg.prune)?, score(&m2)?, None, Some(report))?;

    let (m3, log3) = train(&m2, pick(cfg.kd_stage3), inputs.dev, &cfg.stage3)?;
    w.emit("finetune_pruned", &m3, serde_json::to_value(&cfg.stage3)?, score(&m3)?, Some(log3), None)?;

    let mut models = vec![m1, m2, m3];
    if cfg.quantize {
        let m4 = quantize_fp16(models.last().expect("three stages"))?;
        w.emit("fp16", &m4, serde_json::json!({"precision": "f16"}), score(&m4)?, None, None)?;
        models.push(m4);
    }
    Ok(CompressionOutcome { stages: w.stages, distill_report, models })
}
