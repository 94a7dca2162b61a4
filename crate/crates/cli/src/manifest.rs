use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::commands::CliError;

#[derive(Debug, Serialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub sha256: String,
}

/// Record of one invocation, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub version: String,
    pub inputs: Vec<InputFile>,
    pub outputs: Vec<PathBuf>,
    pub wall_seconds: f64,
}

pub struct Recorder {
    started: Instant,
    manifest: RunManifest,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::invalid(format!("cannot read {}: {e}", path.display())))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

impl Recorder {
    pub fn new(command: &str, config: &impl Serialize, seed: Option<u64>) -> Self {
        Recorder {
            started: Instant::now(),
            manifest: RunManifest {
                command: command.to_string(),
                config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
                seed,
                version: env!("CARGO_PKG_VERSION").to_string(),
                inputs: Vec::new(),
                outputs: Vec::new(),
                wall_seconds: 0.0,
            },
        }
    }

    /// Hashes `path` when it names an existing file; built-in names are
    /// skipped.
    pub fn input(&mut self, path: &str) -> Result<(), CliError> {
        let p = Path::new(path);
        if p.is_file() {
            self.manifest.inputs.push(InputFile {
                path: p.to_path_buf(),
                sha256: sha256_file(p)?,
            });
        }
        Ok(())
    }

    pub fn output(&mut self, path: impl Into<PathBuf>) {
        self.manifest.outputs.push(path.into());
    }

    pub fn finish(mut self, path: &Path) -> Result<(), CliError> {
        self.manifest.wall_seconds = self.started.elapsed().as_secs_f64();
        let text = serde_json::to_string_pretty(&self.manifest).map_err(CliError::internal)?;
        fs::write(path, text).map_err(|e| CliError::invalid(format!("cannot write {}: {e}", path.display())))
    }
}

/// Manifest location for an output file or directory.
pub fn manifest_path(out: &Path) -> PathBuf {
    if out.is_dir() {
        out.join("manifest.json")
    } else {
        let mut s = out.as_os_str().to_owned();
        s.push(".manifest.json");
        PathBuf::from(s)
    }
}
