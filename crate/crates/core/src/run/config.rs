//! Run configuration: scenario, algorithm variant, seed and every
//! hyperparameter, loadable from TOML and echoed into the run log header.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{FeatureConfig, SacConfig};
use crate::curriculum::CurriculumConfig;
use crate::reset::ResetConfig;
use crate::reward::RewardWeights;
use crate::rnd::NoveltyConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Novelty-gated aborts, rule-based resets, informative-set sampling.
    Ours,
    /// Rule-based resets, but no aborts and uniform initial sampling.
    OursNoCurr,
    /// Learned policy with an external (teleport) reset every episode.
    Oracle,
    /// Uniform random actions with an external reset every episode.
    Random,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Ours => "ours",
            Variant::OursNoCurr => "ours_no_curr",
            Variant::Oracle => "oracle",
            Variant::Random => "random",
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    /// Re-derive the three novelty thresholds from warmup novelty
    /// percentiles once the warmup episodes finish.
    pub auto: bool,
    pub abort_percentile: f64,
    pub lower_percentile: f64,
    pub upper_percentile: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            auto: true,
            abort_percentile: 90.0,
            lower_percentile: 55.0,
            upper_percentile: 95.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Builtin scenario name or path to a scenario file.
    pub scenario: String,
    pub variant: Variant,
    pub seed: u64,
    /// Number of training episodes (K).
    pub episodes: u32,
    /// Episodes without abort checks while novelty calibrates.
    pub warmup_episodes: u32,
    pub eval_every: u32,
    pub eval_episodes: u32,
    /// Keep a checkpoint at every evaluation point.
    pub checkpoint_evals: bool,
    pub sac: SacConfig,
    pub rnd: NoveltyConfig,
    pub curriculum: CurriculumConfig,
    pub reward: RewardWeights,
    pub reset: ResetConfig,
    pub features: FeatureConfig,
    pub calibration: CalibrationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: "four_way".into(),
            variant: Variant::Ours,
            seed: 0,
            episodes: 300,
            warmup_episodes: 5,
            eval_every: 10,
            eval_episodes: 20,
            checkpoint_evals: true,
            sac: SacConfig::default(),
            rnd: NoveltyConfig::default(),
            curriculum: CurriculumConfig::default(),
            reward: RewardWeights::default(),
            reset: ResetConfig::default(),
            features: FeatureConfig::default(),
            calibration: CalibrationConfig::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config file: {0}")]
    Io(#[from] std::io::Error),
    #[error("config does not parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl RunConfig {
    /// Desk-scale defaults: the shapes and batch sizes every shipped config
    /// uses, small enough for laptop-core experiments.
    pub fn desk(scenario: &str, variant: Variant, seed: u64) -> Self {
        Self {
            scenario: scenario.into(),
            variant,
            seed,
            sac: SacConfig {
                hidden: vec![64, 64],
                batch_size: 32,
                ..SacConfig::default()
            },
            rnd: NoveltyConfig {
                grid_size: 16,
                hidden: vec![96],
                feature_dim: 32,
                batch_size: 8,
                ..NoveltyConfig::default()
            },
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.episodes == 0 {
            return Err(ConfigError::Invalid("episodes must be >= 1".into()));
        }
        if self.eval_every == 0 || self.eval_episodes == 0 {
            return Err(ConfigError::Invalid(
                "eval_every and eval_episodes must be >= 1".into(),
            ));
        }
        if self.sac.batch_size == 0 || self.rnd.batch_size == 0 {
            return Err(ConfigError::Invalid("batch sizes must be >= 1".into()));
        }
        self.reward
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }
}
