use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{LossConfig, DEFAULT_TEMPERATURE};
use crate::metalearners::MetaLearner;
use crate::sampler::SamplerConfig;
use crate::scaler::ScalerConfig;

/// Experiment configuration, read from JSON with snake_case keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n_way: usize,
    pub k_shot: usize,
    pub m_query: usize,
    #[serde(default)]
    pub epochs: usize,
    #[serde(default = "default_train_episodes")]
    pub train_episodes: usize,
    #[serde(default = "default_valid_episodes")]
    pub valid_episodes: usize,
    #[serde(default = "default_test_episodes")]
    pub test_episodes: usize,
    #[serde(default)]
    pub loss: LossConfig,
    /// Temperature of the cosine softmax used for classification.
    #[serde(default = "default_temperature")]
    pub classify_temperature: f64,
    #[serde(default)]
    pub scaler: ScalerSettings,
    #[serde(default)]
    pub metalearner: MetaLearner,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    pub backend: BackendConfig,
    pub dataset: PathBuf,
    pub split: PathBuf,
    /// Where `train` writes and `eval` reads the encoder checkpoint.
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Number of seeded evaluation runs (seed, seed + 1, ...).
    #[serde(default = "default_runs")]
    pub runs: usize,
    /// Also record training-episode accuracy (with the scaler when enabled).
    #[serde(default)]
    pub log_train_accuracy: bool,
}

fn default_train_episodes() -> usize {
    100
}
fn default_valid_episodes() -> usize {
    100
}
fn default_test_episodes() -> usize {
    1000
}
fn default_runs() -> usize {
    5
}
fn default_temperature() -> f64 {
    DEFAULT_TEMPERATURE
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalerSettings {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(flatten)]
    pub config: ScalerConfig,
}

fn default_true() -> bool {
    true
}

impl Default for ScalerSettings {
    fn default() -> Self {
        ScalerSettings {
            enabled: true,
            config: ScalerConfig::default(),
        }
    }
}

impl ScalerSettings {
    pub fn active(&self) -> Option<ScalerConfig> {
        self.enabled.then_some(self.config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    /// Mean-pooled token embeddings trained from scratch.
    Trainable {
        dim: usize,
        #[serde(default = "default_template")]
        template: String,
    },
    /// Frozen vectors from `LDSE` stores keyed by sample index and label name.
    Precomputed { samples: PathBuf, labels: PathBuf },
}

fn default_template() -> String {
    "This is a [MASK] news: [sentence]".into()
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        cfg.validate()?;
        Ok(cfg)
    }

    /// Makes relative paths relative to the config file's directory.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.dataset);
        fix(&mut self.split);
        if let Some(c) = self.checkpoint.as_mut() {
            fix(c);
        }
        if let BackendConfig::Precomputed { samples, labels } = &mut self.backend {
            fix(samples);
            fix(labels);
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sampler(0).validate()?;
        if self.train_episodes == 0 || self.valid_episodes == 0 || self.test_episodes == 0 {
            return Err(Error::Config("episode counts must be positive".into()));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be positive".into()));
        }
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(self.loss.temperature) {
            return Err(Error::InvalidTemperature(self.loss.temperature));
        }
        if !positive(self.classify_temperature) {
            return Err(Error::InvalidTemperature(self.classify_temperature));
        }
        let o = &self.optimizer;
        if !positive(o.learning_rate)
            || !(0.0..1.0).contains(&o.beta1)
            || !(0.0..1.0).contains(&o.beta2)
            || !positive(o.epsilon)
        {
            return Err(Error::Config(format!("invalid optimizer settings {o:?}")));
        }
        self.scaler.config.validate()?;
        if let MetaLearner::Rrml { lambda } = self.metalearner {
            if !(lambda >= 0.0) || !lambda.is_finite() {
                return Err(Error::Config(format!("ridge lambda must be >= 0, got {lambda}")));
            }
        }
        if let BackendConfig::Trainable { dim, template } = &self.backend {
            if *dim == 0 {
                return Err(Error::Config("encoder dim must be positive".into()));
            }
            crate::encoder::PromptTemplate::new(template.clone())?;
        }
        Ok(())
    }

    pub fn sampler(&self, seed: u64) -> SamplerConfig {
        SamplerConfig {
            n_way: self.n_way,
            k_shot: self.k_shot,
            m_query: self.m_query,
            seed,
        }
    }
}
