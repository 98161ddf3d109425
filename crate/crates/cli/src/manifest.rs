use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use bess_core::Result;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Record of one command invocation and everything it wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub scenario: Option<PathBuf>,
    pub seed: Option<u64>,
    pub policy: Option<String>,
    pub output_dir: PathBuf,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub artifacts: Vec<Artifact>,
}

impl RunManifest {
    pub fn start(command: &str, output_dir: &Path) -> Self {
        Self {
            command: command.into(),
            scenario: None,
            seed: None,
            policy: None,
            output_dir: output_dir.to_path_buf(),
            started_unix: now(),
            finished_unix: 0.0,
            artifacts: Vec::new(),
        }
    }

    /// Writes `contents` into the output directory and records its checksum.
    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<PathBuf> {
        let path = self.output_dir.join(name);
        std::fs::write(&path, contents)?;
        self.artifacts.push(Artifact {
            path: name.into(),
            sha256: hex::encode(Sha256::digest(contents)),
            bytes: contents.len() as u64,
        });
        Ok(path)
    }

    pub fn finish(mut self) -> Result<Self> {
        self.finished_unix = now();
        let json = serde_json::to_string_pretty(&self)?;
        std::fs::write(self.output_dir.join(MANIFEST_FILE), json)?;
        Ok(self)
    }
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}
