use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, Result};

/// Record of one command invocation, written as `manifest.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub seed: u64,
    pub config: RunConfig,
    pub inputs: Vec<PathBuf>,
    pub output_dir: PathBuf,
    pub started_unix: f64,
    pub finished_unix: Option<f64>,
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

impl RunManifest {
    pub fn start(command: &str, seed: u64, config: &RunConfig, inputs: Vec<PathBuf>, output_dir: &Path) -> Self {
        Self {
            command: command.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            seed,
            config: config.clone(),
            inputs,
            output_dir: output_dir.to_path_buf(),
            started_unix: unix_now(),
            finished_unix: None,
        }
    }

    pub fn finish(mut self) -> Result<()> {
        self.finished_unix = Some(unix_now());
        let path = self.output_dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&self).expect("manifest serialises");
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(path, e))
    }
}
