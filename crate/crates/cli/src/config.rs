//! Run configuration: one TOML file with optional `[model]`, `[train]`,
//! `[data]` and `[synth]` tables. Missing keys take their defaults; unknown
//! keys are rejected.

use std::path::Path;

use lgc_core::dataset::DatasetFormat;
use lgc_core::model::ModelConfig;
use lgc_core::synth::{ErrorModel, MotionProfile};
use lgc_core::trainer::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// One set of statistics pooled over every training split.
    #[default]
    Global,
    /// Each sequence normalised by the statistics of its own training split
    /// (evaluation sequences by their own full length).
    PerSequence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub format: DatasetFormat,
    /// Leading seconds of each training sequence used for training; the rest
    /// is validation.
    pub split_seconds: f64,
    pub normalization: Normalization,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            format: DatasetFormat::Euroc,
            split_seconds: 50.0,
            normalization: Normalization::Global,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Sequence name, suffixed `_<i>` when `count > 1`.
    pub name: String,
    pub count: usize,
    pub duration: f64,
    pub rate: f64,
    pub seed: u64,
    pub profile: MotionProfile,
    /// Sensor errors; ideal when absent.
    pub error_model: Option<ErrorModel>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            name: "synth".into(),
            count: 1,
            duration: 60.0,
            rate: 200.0,
            seed: 0,
            profile: MotionProfile::RandomSmooth { max_rate: 1.5 },
            error_model: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
    pub synth: SynthConfig,
}

impl RunConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config {
            path: origin.to_path_buf(),
            msg: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        Self::parse(&text, path)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration is always representable in TOML")
    }

    /// Applies a command-line seed to every seeded component.
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.train.seed = s;
            self.synth.seed = s;
        }
        self
    }

    pub fn validate(&self, origin: &Path) -> Result<()> {
        let wrap = |e: lgc_core::Error| CliError::Config {
            path: origin.to_path_buf(),
            msg: e.to_string(),
        };
        self.model.validate().map_err(wrap)?;
        self.train.validate().map_err(wrap)?;
        if !(self.data.split_seconds > 0.0 && self.data.split_seconds.is_finite()) {
            return Err(CliError::Config {
                path: origin.to_path_buf(),
                msg: format!("data.split_seconds must be positive, got {}", self.data.split_seconds),
            });
        }
        if self.synth.count == 0 {
            return Err(CliError::Config {
                path: origin.to_path_buf(),
                msg: "synth.count must be >= 1".into(),
            });
        }
        Ok(())
    }
}
