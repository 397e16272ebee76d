use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::util::{atomic_write, json_fingerprint, sha256_file};

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRef {
    pub path: PathBuf,
    pub sha256: String,
}

impl ArtifactRef {
    pub fn hash(path: &Path) -> Result<Self> {
        Ok(ArtifactRef { path: path.to_path_buf(), sha256: sha256_file(path)? })
    }
}

/// Record of one command invocation: what went in, what came out, how long
/// each phase took.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Fingerprint of command, config and input hashes; equal for reruns of
    /// the same job.
    pub run_id: String,
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub inputs: Vec<ArtifactRef>,
    pub outputs: Vec<ArtifactRef>,
    /// Wall-clock seconds per phase.
    pub timings: BTreeMap<String, f64>,
    pub toolkit_version: String,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed: u64) -> Self {
        RunManifest {
            run_id: String::new(),
            command: command.to_string(),
            config,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings: BTreeMap::new(),
            toolkit_version: TOOLKIT_VERSION.to_string(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(ArtifactRef::hash(path)?);
        Ok(())
    }

    pub fn add_output(&mut self, path: &Path) -> Result<()> {
        self.outputs.push(ArtifactRef::hash(path)?);
        Ok(())
    }

    pub fn time(&mut self, phase: &str, seconds: f64) {
        *self.timings.entry(phase.to_string()).or_default() += seconds;
    }

    /// Re-hashes every listed output, fills in the run id and writes the
    /// manifest atomically.
    pub fn write(&mut self, path: &Path) -> Result<()> {
        for o in &mut self.outputs {
            o.sha256 = sha256_file(&o.path)?;
        }
        let inputs: Vec<&str> = self.inputs.iter().map(|i| i.sha256.as_str()).collect();
        self.run_id = json_fingerprint(&(&self.command, &self.config, self.seed, inputs))?[..16].to_string();
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        atomic_write(path, &bytes)
    }

    /// Checks that every output still hashes to its recorded value.
    pub fn verify(&self) -> Result<bool> {
        for o in &self.outputs {
            if sha256_file(&o.path)? != o.sha256 {
                return Ok(false);
            }
        }
        Ok(true)
    }
}
