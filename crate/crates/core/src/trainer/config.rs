use serde::{Deserialize, Serialize};

use super::grid::grid_steps;
use super::optim::OptimizerConfig;
use crate::error::{Error, Result};
use crate::metrics::Objective;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Step of the preference grid; `1/interval` must be an integer.
    pub preference_interval: f64,
    /// Monte-Carlo rollouts per item in stage 2.
    pub n_samples: usize,
    pub batch_size: usize,
    pub lr1: f64,
    pub lr2: f64,
    pub epochs1: usize,
    pub epochs2: usize,
    /// Reward objectives; their count is the preference dimension.
    pub objectives: Vec<Objective>,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
    pub temperature: f64,
    /// Joint gradient-norm cap applied before each update.
    pub clip_norm: Option<f64>,
    /// Write elapsed seconds into the log. Off by default so that logs of
    /// identical runs are byte-identical.
    pub log_wall_time: bool,
    /// Worker threads for per-item work within a batch.
    pub threads: usize,
    pub preference_sampling: PreferenceSampling,
}

/// How often a new preference vector is drawn during training.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreferenceSampling {
    /// One draw shared by every item of a batch.
    #[default]
    PerBatch,
    /// An independent draw for each item.
    PerItem,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            preference_interval: 0.1,
            n_samples: 5,
            batch_size: 8,
            lr1: 0.01,
            lr2: 0.001,
            epochs1: 10,
            epochs2: 10,
            objectives: vec![Objective::Bleu(1), Objective::CeF1],
            seed: 1,
            optimizer: OptimizerConfig::default(),
            temperature: 1.0,
            clip_norm: None,
            log_wall_time: false,
            threads: 1,
            preference_sampling: PreferenceSampling::PerBatch,
        }
    }
}

impl TrainConfig {
    pub fn pref_dim(&self) -> usize {
        self.objectives.len()
    }

    pub fn validate(&self) -> Result<()> {
        grid_steps(self.preference_interval)?;
        if self.n_samples == 0 {
            return Err(Error::Config("n_samples must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.objectives.is_empty() {
            return Err(Error::Config("at least one objective is required".into()));
        }
        for (name, lr) in [("lr1", self.lr1), ("lr2", self.lr2)] {
            if !(lr >= 0.0 && lr.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {lr}")));
            }
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config(format!("temperature must be positive, got {}", self.temperature)));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(Error::Config(format!("clip_norm must be positive, got {c}")));
            }
        }
        if self.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        self.optimizer.validate()
    }
}
