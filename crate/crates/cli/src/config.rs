use std::path::Path;

use amptcr_core::alignment::DEFAULT_RMSD_THRESHOLD;
use amptcr_core::evalkit::{FoldMode, FoldPlan};
use amptcr_core::pipeline::CloudConfig;
use amptcr_neural::ModelConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FoldSettings {
    pub mode: FoldMode,
    pub folds: usize,
    /// Random-split mode only.
    pub train_fraction: f64,
}

impl Default for FoldSettings {
    fn default() -> Self {
        FoldSettings {
            mode: FoldMode::Kfold,
            folds: 6,
            train_fraction: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChallengeSettings {
    pub trials: usize,
    pub rmsd_threshold: f64,
}

impl Default for ChallengeSettings {
    fn default() -> Self {
        ChallengeSettings {
            trials: 20,
            rmsd_threshold: DEFAULT_RMSD_THRESHOLD,
        }
    }
}

/// Everything a run depends on. `seed` feeds surface sampling, model
/// initialization, batching and fold assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub cloud: CloudConfig,
    pub model: ModelConfig,
    pub folds: FoldSettings,
    pub challenge: ChallengeSettings,
    /// Compute fold metrics on calibrated predictions.
    pub calibrate: bool,
    pub fingerprint_radius: usize,
    pub fingerprint_bits: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            cloud: CloudConfig::default(),
            model: ModelConfig::default(),
            folds: FoldSettings::default(),
            challenge: ChallengeSettings::default(),
            calibrate: true,
            fingerprint_radius: amptcr_core::fingerprint::DEFAULT_RADIUS,
            fingerprint_bits: amptcr_core::fingerprint::DEFAULT_NBITS,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => PipelineConfig::default(),
        };
        Ok(cfg)
    }

    /// Copies the shared seed and point count into the sub-configs and
    /// checks every invariant.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        self.cloud.sample_seed = self.seed;
        self.model.seed = self.seed;
        self.model.n_points = self.cloud.n_points;
        let bad = |e: &dyn std::fmt::Display| CliError::Config(e.to_string());
        self.cloud.validate().map_err(|e| bad(&e))?;
        self.model.validate().map_err(|e| bad(&e))?;
        self.fold_plan().validate().map_err(|e| bad(&e))?;
        if !self.fingerprint_bits.is_power_of_two() {
            return Err(CliError::Config(format!("fingerprint_bits {} is not a power of two", self.fingerprint_bits)));
        }
        if self.challenge.trials < 2 || !(self.challenge.rmsd_threshold > 0.0) {
            return Err(CliError::Config("challenge needs ≥ 2 trials and a positive threshold".into()));
        }
        Ok(self)
    }

    pub fn fold_plan(&self) -> FoldPlan {
        match self.folds.mode {
            FoldMode::Kfold => FoldPlan::kfold(self.folds.folds, self.seed),
            FoldMode::Random => FoldPlan::random_split(self.folds.folds, self.folds.train_fraction, self.seed),
        }
    }

    pub fn hash(&self) -> Result<String, CliError> {
        amptcr_core::cloudstore::config_hash(self).map_err(|e| CliError::Config(e.to_string()))
    }
}
