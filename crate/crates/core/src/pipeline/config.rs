use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::hssynth::CorpusSpec;
use crate::learners::{AdaBoostParams, GradientBoostParams, Hyperparams, ModelKind, RandomForestParams};
use crate::signalproc::DspConfig;

use super::PipelineError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    /// Share of each class's kept recordings held out for testing.
    pub test_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub classifiers: Vec<ModelKind>,
    /// Weight cycles so every class carries the same total weight.
    pub balance_classes: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelsConfig {
    pub random_forest: RandomForestParams,
    pub adaboost: AdaBoostParams,
    pub gradient_boost: GradientBoostParams,
}

impl ModelsConfig {
    pub fn hyperparams(&self, kind: ModelKind) -> Hyperparams {
        match kind {
            ModelKind::RandomForest => Hyperparams::RandomForest(self.random_forest),
            ModelKind::Adaboost => Hyperparams::Adaboost(self.adaboost),
            ModelKind::GradientBoost => Hyperparams::GradientBoost(self.gradient_boost),
        }
    }
}

/// Every tunable of a run. A config file must spell out every key;
/// `Config::default().to_toml()` is the template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub dsp: DspConfig,
    pub synth: CorpusSpec,
    pub split: SplitConfig,
    pub train: TrainConfig,
    pub models: ModelsConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 7,
            dsp: DspConfig::default(),
            synth: CorpusSpec::default(),
            split: SplitConfig { test_fraction: 0.2 },
            train: TrainConfig {
                classifiers: ModelKind::ALL.to_vec(),
                balance_classes: true,
            },
            models: ModelsConfig {
                random_forest: RandomForestParams::default(),
                adaboost: AdaBoostParams::default(),
                gradient_boost: GradientBoostParams::default(),
            },
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let cfg: Config = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            PipelineError::Config(m) => PipelineError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if !(self.split.test_fraction > 0.0 && self.split.test_fraction < 1.0) {
            return bad(format!("split.test_fraction = {} not in (0, 1)", self.split.test_fraction));
        }
        if self.train.classifiers.is_empty() {
            return bad("train.classifiers is empty".into());
        }
        let models = &self.models;
        models
            .random_forest
            .validate()
            .and_then(|_| models.adaboost.validate())
            .and_then(|_| models.gradient_boost.validate())
            .or_else(|e| bad(format!("models: {e}")))?;
        if !(self.dsp.f_lo > 0.0 && self.dsp.f_lo < self.dsp.f_hi) {
            return bad(format!("dsp.f_lo = {} must be positive and below dsp.f_hi = {}", self.dsp.f_lo, self.dsp.f_hi));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = Config::default();
        let back = Config::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn missing_key_is_named() {
        let text = Config::default().to_toml().replace("f_hi = 500.0\n", "");
        let err = Config::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("f_hi"), "{err}");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = Config::default().to_toml().replace("[dsp]\n", "[dsp]\nf_mid = 3.0\n");
        let err = Config::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("f_mid"), "{err}");
    }

    #[test]
    fn bad_values_are_rejected() {
        let mut cfg = Config::default();
        cfg.split.test_fraction = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = Config::default();
        cfg.models.gradient_boost.n_rounds = 0;
        assert!(cfg.validate().is_err());
    }
}
