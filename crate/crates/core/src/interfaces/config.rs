//! TOML run configuration.
//!
//! ```toml
//! seed = 42
//!
//! [process]
//! priority_surcharge = 1000.0
//!
//! [bank]
//! hq_min_est = 0.35
//!
//! [experiment]
//! n_train = 20000
//!
//! [learner]
//! k = 20
//! ```
//!
//! Every section and key is optional. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::evaluation::{ExperimentConfig, LearnerConfig};
use crate::{BankPolicy, ProcessSpec, Simulator};

pub const SEED_ENV: &str = "SIMBANK_SEED";
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub n_reps: usize,
    pub delta: f64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        let d = ExperimentConfig::default();
        Self {
            n_train: d.n_train,
            n_val: d.n_val,
            n_test: d.n_test,
            n_reps: d.n_reps,
            delta: d.delta,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub process: ProcessSpec,
    pub bank: BankPolicy,
    pub experiment: ExperimentSection,
    pub learner: LearnerConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.process.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| SimError::Config(e.to_string()))
    }

    /// Explicit seed, else the config file's, else `SIMBANK_SEED`, else 42.
    pub fn resolve_seed(&self, explicit: Option<u64>) -> Result<u64> {
        if let Some(s) = explicit.or(self.seed) {
            return Ok(s);
        }
        Ok(env_seed()?.unwrap_or(DEFAULT_SEED))
    }

    pub fn simulator(&self, seed: u64) -> Simulator {
        Simulator::with_config(self.process.clone(), self.bank.clone(), seed)
    }

    pub fn experiment_config(&self) -> ExperimentConfig {
        let e = &self.experiment;
        ExperimentConfig {
            n_train: e.n_train,
            n_val: e.n_val,
            n_test: e.n_test,
            n_reps: e.n_reps,
            delta: e.delta,
            learner: self.learner.clone(),
        }
    }
}

pub fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| SimError::Config(format!("{SEED_ENV}='{v}' is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}
