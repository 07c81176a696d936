use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use maskaggr::metrics::Evaluation;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult, ErrorRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub wall_time_s: f64,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorRecord>,
}

/// Everything needed to rerun and check a pipeline or sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: Value,
    pub config_sha256: String,
    pub seeds: BTreeMap<String, u64>,
    /// Worker threads used; results do not depend on it.
    pub threads: usize,
    /// Input file path -> SHA-256 of its content.
    pub inputs: BTreeMap<String, String>,
    /// Output file name (relative to the run directory) -> SHA-256.
    pub outputs: BTreeMap<String, String>,
    pub stages: Vec<StageRecord>,
    pub metrics: Option<Evaluation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics_before_postprocess: Option<Evaluation>,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorRecord>,
}

impl Manifest {
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text).map_err(|e| CliError::io(path, e))
    }

    /// Fails with a config error if any recorded input changed.
    pub fn verify_inputs(&self) -> CliResult<()> {
        for (path, expected) in &self.inputs {
            let found = sha256_file(Path::new(path))?;
            if &found != expected {
                return Err(CliError::Config(format!("input {path} changed since the manifest was written")));
            }
        }
        Ok(())
    }
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_bytes(&bytes))
}

/// Collects stage timings and file hashes while a run progresses.
#[derive(Debug, Default)]
pub struct Recorder {
    pub stages: Vec<StageRecord>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub failure: Option<ErrorRecord>,
}

impl Recorder {
    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> CliResult<T>) -> CliResult<T> {
        let start = Instant::now();
        let result = f(self);
        let wall_time_s = start.elapsed().as_secs_f64();
        let error = result.as_ref().err().map(|e| e.record(name));
        if self.failure.is_none() {
            self.failure.clone_from(&error);
        }
        self.stages.push(StageRecord {
            name: name.to_owned(),
            wall_time_s,
            status: if error.is_some() { "error" } else { "ok" }.to_owned(),
            error,
        });
        result
    }

    /// Hashes an input file or every file of a container base path.
    pub fn input(&mut self, paths: &[&Path]) -> CliResult<()> {
        for p in paths {
            self.inputs.insert(p.display().to_string(), sha256_file(p)?);
        }
        Ok(())
    }

    pub fn output(&mut self, dir: &Path, names: &[String]) -> CliResult<()> {
        for n in names {
            self.outputs.insert(n.clone(), sha256_file(&dir.join(n))?);
        }
        Ok(())
    }
}
