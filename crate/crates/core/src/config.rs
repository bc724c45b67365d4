//! TOML run configuration. Every section is optional and falls back to the
//! documented defaults; unknown keys are rejected.
//!
//! ```toml
//! [drone]
//! base_speed = "105 km/h"
//! min_energy_speed = "70 km/h"
//!
//! [injection]
//! probability = 0.3
//! factor_range = [1.3, 2.2]
//!
//! [composer]
//! lookahead_depth = 1
//! exhaustive_cap = 100
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bench::BenchConfig;
use crate::composer::{ComposerConfig, PredictorConfig, Strategy};
use crate::energy::DroneSpec;
use crate::failure::{FailurePolicy, InjectionConfig};
use crate::net::{NetworkGenConfig, PayloadLimits, WindowPolicy};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("bad config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComposerSection {
    pub reserve_pct: f64,
    pub lookahead_depth: usize,
    pub exhaustive_cap: usize,
}

impl Default for ComposerSection {
    fn default() -> Self {
        let c = ComposerConfig::default();
        ComposerSection { reserve_pct: c.reserve_pct, lookahead_depth: c.lookahead_depth, exhaustive_cap: c.exhaustive_cap }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RequestSection {
    pub count: usize,
    pub seed: u64,
    pub payloads: PayloadLimits,
    pub window: WindowPolicy,
}

impl Default for RequestSection {
    fn default() -> Self {
        RequestSection { count: 200, seed: 7, payloads: PayloadLimits::default(), window: WindowPolicy::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub strategies: Vec<Strategy>,
    pub seeds: Vec<u64>,
    pub workers: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        let b = BenchConfig::default();
        BenchSection { strategies: b.strategies, seeds: b.seeds, workers: b.workers }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub drone: DroneSpec,
    pub policy: FailurePolicy,
    pub injection: InjectionConfig,
    pub composer: ComposerSection,
    pub predictor: PredictorConfig,
    pub network: NetworkGenConfig,
    pub requests: RequestSection,
    pub bench: BenchSection,
}

impl Config {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let s = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&s)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.composer_config().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.injection.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.predictor.pretrain.validate().map_err(|e| ConfigError::Invalid(format!("pretrain: {e}")))?;
        self.predictor.continual.validate().map_err(|e| ConfigError::Invalid(format!("continual: {e}")))?;
        if self.requests.payloads.max_weight_kg > self.drone.max_payload {
            return Err(ConfigError::Invalid("request payload limit exceeds the drone's max payload".into()));
        }
        Ok(())
    }

    pub fn composer_config(&self) -> ComposerConfig {
        ComposerConfig {
            drone: self.drone.clone(),
            policy: self.policy.clone(),
            reserve_pct: self.composer.reserve_pct,
            lookahead_depth: self.composer.lookahead_depth,
            exhaustive_cap: self.composer.exhaustive_cap,
            predictor: self.predictor.clone(),
        }
    }

    pub fn bench_config(&self) -> BenchConfig {
        BenchConfig {
            strategies: self.bench.strategies.clone(),
            seeds: self.bench.seeds.clone(),
            composer: self.composer_config(),
            injection: self.injection.clone(),
            workers: self.bench.workers,
        }
    }
}
