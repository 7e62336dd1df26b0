//! Run configuration: data paths plus every model, ensemble, optimizer and
//! decoding setting.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::decoding::DecodeConfig;
use crate::error::{Error, Result};
use crate::seq2seq::ModelConfig;
use crate::training::{EnsembleConfig, OptimizerConfig, Precision};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub train: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    pub min_freq: usize,
    /// Reject attributes outside the eight-key schema.
    pub strict_schema: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            train: None,
            valid: None,
            min_freq: 1,
            strict_schema: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub model: ModelConfig,
    pub ensemble: EnsembleConfig,
    pub optimizer: OptimizerConfig,
    pub decode: DecodeConfig,
    pub epochs: usize,
    pub seed: u64,
    pub precision: Precision,
    pub threads: usize,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: DataConfig::default(),
            model: ModelConfig::default(),
            ensemble: EnsembleConfig::default(),
            optimizer: OptimizerConfig::default(),
            decode: DecodeConfig::default(),
            epochs: 13,
            seed: 1,
            precision: Precision::F64,
            threads: 1,
            output_dir: PathBuf::from("run"),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks value ranges and that every configured data path exists.
    pub fn validate(&self) -> Result<()> {
        let checks = [
            self.model.validate(),
            self.ensemble.validate(),
            self.optimizer.validate(),
            self.decode.validate(),
        ];
        for c in checks {
            c.map_err(Error::Config)?;
        }
        if self.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        for path in self.data.train.iter().chain(&self.data.valid) {
            if !path.is_file() {
                return Err(Error::Config(format!("data file {} does not exist", path.display())));
            }
        }
        Ok(())
    }
}
