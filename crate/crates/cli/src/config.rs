use std::path::Path;

use anyhow::Context as _;
use prefseq::model::ModelConfig;
use prefseq::trainer::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

/// Model and training settings as stored in `config.toml`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<RunConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, self.to_toml()).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    /// Checks both halves and that the preference dimension matches the
    /// number of objectives.
    pub fn validate(&self) -> CliResult<()> {
        let usage = |e: prefseq::Error| CliError::Usage(e.to_string());
        self.model.validate().map_err(usage)?;
        self.train.validate().map_err(usage)?;
        if self.model.pref_dim != self.train.pref_dim() {
            return Err(CliError::Usage(format!(
                "model.pref_dim is {} but {} objectives are configured",
                self.model.pref_dim,
                self.train.pref_dim()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_means_defaults() {
        let c: RunConfig = toml::from_str("").unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn round_trips_through_toml() {
        let mut c = RunConfig::default();
        c.train.lr2 = 0.1 + 0.2;
        c.train.clip_norm = Some(5.0);
        c.train.optimizer = prefseq::trainer::OptimizerConfig::adam();
        let back: RunConfig = toml::from_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("[model]\nwidth = 3\n").is_err());
        assert!(toml::from_str::<RunConfig>("[other]\n").is_err());
    }
}
