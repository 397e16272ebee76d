//! Run configuration: one JSON document with a section per module.

use std::path::{Path, PathBuf};

use prunemt::bench::DecodeConfig;
use prunemt::compress::{DistillConfig, PruneConfig, TrainConfig};
use prunemt::corpus::{NoiseRates, SplitSpec, ToyLanguageSpec};
use prunemt::filter::FilterConfig;
use prunemt::model::ModelConfig;
use prunemt::{Error, LangCode, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable naming the directory searched for
/// `<command>.json`, then `default.json`, when `--config` is absent.
pub const CONFIG_DIR_VAR: &str = "PRUNEMT_CONFIG_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub languages: ToyLanguageSpec,
    pub splits: SplitSpec,
    pub noise: NoiseRates,
    /// Sentences per language written for language-ID training.
    pub langid_seed_sentences: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig { languages: ToyLanguageSpec::default(), splits: SplitSpec::default(), noise: NoiseRates::default(), langid_seed_sentences: 200 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScorerConfig {
    /// Pivot language of the co-occurrence embedder.
    pub semantic_pivot: LangCode,
    /// Checkpoint scoring pairs in the quality-estimation stage.
    pub qe_teacher: Option<PathBuf>,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        ScorerConfig { semantic_pivot: "eng_Latn".parse().expect("valid code"), qe_teacher: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub warmup_batches: usize,
    pub repetitions: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { warmup_batches: 1, repetitions: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub data: DataConfig,
    pub filter: FilterConfig,
    pub scorers: ScorerConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub prune: PruneConfig,
    pub distill: DistillConfig,
    pub decode: DecodeConfig,
    pub bench: BenchConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            seed: 1,
            data: DataConfig::default(),
            filter: FilterConfig::default(),
            scorers: ScorerConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            prune: PruneConfig::default(),
            distill: DistillConfig::default(),
            decode: DecodeConfig::default(),
            bench: BenchConfig::default(),
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Sets `path` (dot-separated keys) in `root`, creating objects on the way.
/// `raw` is parsed as JSON, falling back to a plain string.
pub fn apply_override(root: &mut Value, path: &str, raw: &str) -> Result<()> {
    let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(config_err(format!("bad override path `{path}`")));
    }
    let mut node = root;
    for k in &keys[..keys.len() - 1] {
        if node.get(*k).is_none_or(Value::is_null) {
            node.as_object_mut().ok_or_else(|| config_err(format!("`{path}`: `{k}` is not inside an object")))?.insert(k.to_string(), Value::Object(Default::default()));
        }
        node = node.get_mut(*k).expect("just inserted");
        if !node.is_object() {
            return Err(config_err(format!("`{path}`: `{k}` is not an object")));
        }
    }
    node.as_object_mut().ok_or_else(|| config_err(format!("`{path}` does not address an object field")))?.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

fn default_file(command: &str) -> Option<PathBuf> {
    let dir = PathBuf::from(std::env::var_os(CONFIG_DIR_VAR)?);
    [format!("{command}.json"), "default.json".to_string()].into_iter().map(|f| dir.join(f)).find(|p| p.is_file())
}

/// Reads the config file (explicit, from the config directory, or none),
/// applies `key=value` overrides and validates every section.
pub fn load(command: &str, file: Option<&Path>, overrides: &[String]) -> Result<(RunConfig, Option<PathBuf>)> {
    let path = file.map(Path::to_path_buf).or_else(|| default_file(command));
    let mut root = match &path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| config_err(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| config_err(format!("config {}: {e}", p.display())))?
        }
        None => Value::Object(Default::default()),
    };
    if !root.is_object() {
        return Err(config_err("config must be a JSON object"));
    }
    for o in overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| config_err(format!("override `{o}` is not key=value")))?;
        apply_override(&mut root, k.trim(), v)?;
    }
    let cfg: RunConfig = serde_json::from_value(root).map_err(|e| config_err(e.to_string()))?;
    cfg.validate()?;
    Ok((cfg, path))
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_err(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version)));
        }
        self.data.noise.validate()?;
        self.filter.validate()?;
        self.train.validate()?;
        self.decode.validate()?;
        if self.bench.repetitions == 0 {
            return Err(config_err("bench.repetitions must be positive"));
        }
        if self.distill.beam_size == 0 || self.distill.max_len == 0 {
            return Err(config_err("distill.beam_size and distill.max_len must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_create_and_replace() {
        let mut v = serde_json::json!({"train": {"seed": 1}});
        apply_override(&mut v, "train.seed", "7").unwrap();
        apply_override(&mut v, "filter.stages.semantic", "false").unwrap();
        apply_override(&mut v, "scorers.semantic_pivot", "hau_Latn").unwrap();
        assert_eq!(v["train"]["seed"], 7);
        assert_eq!(v["filter"]["stages"]["semantic"], false);
        assert_eq!(v["scorers"]["semantic_pivot"], "hau_Latn");
        assert!(apply_override(&mut v, "train.seed.x", "1").is_err());
        assert!(apply_override(&mut v, "a..b", "1").is_err());
    }

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        let partial: RunConfig = serde_json::from_str(r#"{"schema_version": 1, "train": {"learning_rate": 0.001}}"#).unwrap();
        assert_eq!(partial.train.learning_rate, 0.001);
        assert!(serde_json::from_str::<RunConfig>(r#"{"trian": {}}"#).is_err());
    }
}
