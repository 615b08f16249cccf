//! Run configuration: TOML file plus command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, ErrorKind};

/// Training hyperparameters, mirrored from the core trainer defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub train_set_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub dropout: f64,
    pub holdout_size: usize,
    pub holdout_threshold: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        let t = lesion_core::train::TrialConfig::default();
        Self {
            train_set_size: t.train_set_size,
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            dropout: t.dropout,
            holdout_size: t.holdout_size,
            holdout_threshold: t.holdout_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FigureConfig {
    pub fig2: bool,
    pub fig3: bool,
    pub fig4: bool,
    /// Probe image whose per-group deltas the fig2 bars show.
    pub fig2_image_id: usize,
    /// Trial whose deltas the fig2 bars show.
    pub fig2_trial_id: u32,
}

impl Default for FigureConfig {
    fn default() -> Self {
        Self {
            fig2: true,
            fig3: true,
            fig4: true,
            fig2_image_id: 0,
            fig2_trial_id: 0,
        }
    }
}

/// Full pipeline configuration. Defaults mirror the standard experiment:
/// 5 trials, 10 ablation groups, k swept over 2..=12.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub trials: usize,
    pub groups: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub out_dir: PathBuf,
    pub training: TrainingConfig,
    pub figures: FigureConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            trials: 5,
            groups: 10,
            k_min: 2,
            k_max: 12,
            out_dir: PathBuf::from("out"),
            training: TrainingConfig::default(),
            figures: FigureConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::new(
                ErrorKind::Config,
                format!("cannot read config '{}': {e}", path.display()),
            )
        })?;
        toml::from_str(&text).map_err(|e| {
            CliError::new(
                ErrorKind::Config,
                format!("cannot parse config '{}': {e}", path.display()),
            )
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.trials < 2 {
            return Err(CliError::new(
                ErrorKind::Config,
                "trials must be >= 2 (cross-trial clustering)".into(),
            ));
        }
        if self.groups == 0 {
            return Err(CliError::new(ErrorKind::Config, "groups must be >= 1".into()));
        }
        if self.k_min < 2 || self.k_min > self.k_max {
            return Err(CliError::new(
                ErrorKind::Config,
                format!("bad k range {}..={}", self.k_min, self.k_max),
            ));
        }
        let points = self.trials * self.groups;
        if self.k_max > points {
            return Err(CliError::new(
                ErrorKind::Config,
                format!(
                    "k_max {} exceeds trials*groups = {points} data points",
                    self.k_max
                ),
            ));
        }
        Ok(())
    }

    pub fn trial_config(&self) -> lesion_core::train::TrialConfig {
        lesion_core::train::TrialConfig {
            seed: self.seed,
            train_set_size: self.training.train_set_size,
            epochs: self.training.epochs,
            learning_rate: self.training.learning_rate,
            batch_size: self.training.batch_size,
            dropout: self.training.dropout,
            holdout_size: self.training.holdout_size,
            holdout_threshold: self.training.holdout_threshold,
        }
    }
}
