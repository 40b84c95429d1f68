use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{HyperParams, LearnerKind};
use crate::matchenv::EnvConfig;

/// A full experiment: environment, learner, budget and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Free-form label used in output file names and the summary.
    pub name: String,
    /// Learner kind name; kept as text so an unknown kind gets its own error.
    pub learner: String,
    /// Environment steps with learning enabled.
    pub train_steps: u64,
    /// Steps per evaluation period.
    pub period_length: u64,
    /// Periods appended after training with learning frozen; these form the
    /// converged window for fairness and welfare summaries.
    pub eval_periods: u64,
    /// Every n-th emitted experience is scored for density-prediction error.
    pub density_sample_every: u64,
    pub seeds: Vec<u64>,
    pub env: EnvConfig,
    pub hyper: HyperParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            learner: "dqn".into(),
            train_steps: 200_000,
            period_length: 1_000,
            eval_periods: 100,
            density_sample_every: 4,
            seeds: vec![1],
            env: EnvConfig::default(),
            hyper: HyperParams::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn kind(&self) -> Result<LearnerKind> {
        self.learner.parse()
    }

    pub fn validate(&self) -> Result<()> {
        self.kind()?;
        if self.period_length == 0 {
            return Err(Error::Config("period_length must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.density_sample_every == 0 {
            return Err(Error::Config("density_sample_every must be positive".into()));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::Config("name must be a non-empty file-name-safe label".into()));
        }
        self.env.validate()?;
        self.hyper.validate()
    }

    pub fn total_steps(&self) -> u64 {
        self.train_steps + self.eval_periods * self.period_length
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(schema_error)?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile { path: path.into() });
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }
}

pub(crate) fn schema_error(e: toml::de::Error) -> Error {
    let message = e.message().to_string();
    let key = message
        .split('`')
        .nth(1)
        .filter(|_| message.starts_with("unknown field"))
        .map(str::to_string)
        .unwrap_or_else(|| "<document>".into());
    Error::Schema { key, message }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig {
            learner: "dedqn".into(),
            seeds: vec![3, 4],
            ..ExperimentConfig::default()
        };
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_toml_str("learner = \"dqn\"\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, Error::Schema { ref key, .. } if key == "bogus"), "{err}");
        assert!(ExperimentConfig::from_toml_str("[env]\ndar = \"abc\"\n").is_err());
    }

    #[test]
    fn unknown_learner_is_distinct() {
        let cfg = ExperimentConfig {
            learner: "ppo".into(),
            ..ExperimentConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::UnknownLearner(_))));
    }
}
