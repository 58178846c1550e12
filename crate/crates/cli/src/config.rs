use std::fs;
use std::path::{Path, PathBuf};

use dsc_core::data::{EngineerConfig, SplitFractions};
use dsc_core::trainer::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Failure, ResultExt};

/// Everything a training run depends on. A copy is written into the output
/// directory before training starts; re-running from it reproduces the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Raw transaction CSV or engineered feature table.
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Seeds the data pipeline and the trainer.
    pub seed: u64,
    pub split: SplitFractions,
    /// Balance the training split by undersampling legitimate rows.
    pub undersample: bool,
    pub engineer: EngineerConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: None,
            out: None,
            seed: 0,
            split: SplitFractions::default(),
            undersample: true,
            engineer: EngineerConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, Failure> {
        let text = fs::read_to_string(path).usage_ctx(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).usage_ctx(|| format!("invalid config {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String, Failure> {
        toml::to_string_pretty(self).runtime_ctx(|| "cannot serialise run config".to_string())
    }

    /// The trainer seed always follows the run seed.
    pub fn finalize(mut self) -> Self {
        self.train.seed = self.seed;
        self
    }
}
