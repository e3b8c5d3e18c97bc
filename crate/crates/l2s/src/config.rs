//! Run configuration: a flat-sectioned TOML document.
//!
//! ```toml
//! [run]
//! seed = 42
//! total_steps = 2000
//! batch_size = 32
//! eval_interval = 32
//! step_size = 1.0
//! smoothing = 1e-4
//! max_example_tokens = 8192
//! initial_alpha = [0.5, 0.5]
//! checkpoint_accuracy_factor = 0.3
//! trainer = "simulated"            # or "external"
//! # static_alpha = [0.5, 0.5]      # pin the mixture (static baseline mode)
//!
//! [data]                           # required for the simulated trainer
//! system1 = "pools/system1.jsonl"
//! system2 = "pools/system2.jsonl"
//! dev = "pools/dev.jsonl"
//! tokenizer = "whitespace"         # whitespace | bytes | external
//!
//! [surface]                        # simulated trainer response surface
//! acc_long = 0.75
//! acc_short = 0.40
//! tok_long = 1300.0
//! tok_short = 300.0
//! rate_token = 3.0
//! rate_acc = 2.0
//! noise_sd_acc = 0.01
//! noise_sd_tok = 10.0
//! exposure_scale = 1000.0
//!
//! [external]                       # required for the external trainer
//! command = ["python3", "trainer.py"]
//! timeout_secs = 86400
//! reference_short_tokens = 300.0
//! reference_short_accuracy = 0.40
//! reference_long_tokens = 1300.0
//! reference_long_accuracy = 0.75
//! ```
//!
//! Relative data paths resolve against the config file's directory. The
//! `L2S_SEED` environment variable overrides `run.seed`; an explicit
//! `--seed` flag overrides both.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::benefit::{ReferenceProfile, ValidationReport};
use crate::error::{Error, Result};
use crate::metrics::Tokenizer;
use crate::mixture::{MixtureWeights, ReweightConfig};
use crate::pipeline::PipelineParams;
use crate::sim::ResponseSurface;

/// Name of the seed-override environment variable.
pub const SEED_ENV_VAR: &str = "L2S_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainerKind {
    #[default]
    Simulated,
    External,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_total_steps")]
    pub total_steps: u64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_eval_interval")]
    pub eval_interval: u64,
    #[serde(default = "default_step_size")]
    pub step_size: f64,
    #[serde(default = "default_smoothing")]
    pub smoothing: f64,
    #[serde(default = "default_max_example_tokens")]
    pub max_example_tokens: usize,
    #[serde(default = "default_initial_alpha")]
    pub initial_alpha: Vec<f64>,
    #[serde(default = "default_checkpoint_factor")]
    pub checkpoint_accuracy_factor: f64,
    #[serde(default)]
    pub static_alpha: Option<Vec<f64>>,
    #[serde(default)]
    pub trainer: TrainerKind,
}

fn default_total_steps() -> u64 {
    2000
}
fn default_batch_size() -> usize {
    32
}
fn default_eval_interval() -> u64 {
    32
}
fn default_step_size() -> f64 {
    1.0
}
fn default_smoothing() -> f64 {
    1e-4
}
fn default_max_example_tokens() -> usize {
    8192
}
fn default_initial_alpha() -> Vec<f64> {
    vec![0.5, 0.5]
}
fn default_checkpoint_factor() -> f64 {
    0.3
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 0,
            total_steps: default_total_steps(),
            batch_size: default_batch_size(),
            eval_interval: default_eval_interval(),
            step_size: default_step_size(),
            smoothing: default_smoothing(),
            max_example_tokens: default_max_example_tokens(),
            initial_alpha: default_initial_alpha(),
            checkpoint_accuracy_factor: default_checkpoint_factor(),
            static_alpha: None,
            trainer: TrainerKind::Simulated,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub system1: PathBuf,
    pub system2: PathBuf,
    pub dev: PathBuf,
    #[serde(default)]
    pub tokenizer: Tokenizer,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalSection {
    /// Program and arguments to spawn.
    pub command: Vec<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    pub reference_short_tokens: f64,
    pub reference_short_accuracy: f64,
    pub reference_long_tokens: f64,
    pub reference_long_accuracy: f64,
}

fn default_timeout_secs() -> u64 {
    86_400
}

impl ExternalSection {
    pub fn reference_profile(&self) -> Result<ReferenceProfile> {
        ReferenceProfile::new(
            ValidationReport::new(
                self.reference_short_accuracy,
                self.reference_short_tokens,
                1,
                0,
            )?,
            ValidationReport::new(
                self.reference_long_accuracy,
                self.reference_long_tokens,
                1,
                0,
            )?,
        )
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub data: Option<DataSection>,
    #[serde(default)]
    pub surface: ResponseSurface,
    #[serde(default)]
    pub external: Option<ExternalSection>,
}

impl RunConfig {
    /// Parse a config file; relative data paths become relative to its
    /// directory.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let mut config: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let (Some(dir), Some(data)) = (path.parent(), config.data.as_mut()) {
            for p in [&mut data.system1, &mut data.system2, &mut data.dev] {
                if p.is_relative() {
                    *p = dir.join(&p);
                }
            }
        }
        Ok(config)
    }

    /// Seed precedence: explicit flag, then `L2S_SEED`, then the config.
    pub fn resolve_seed(&self, cli_seed: Option<u64>) -> Result<u64> {
        if let Some(seed) = cli_seed {
            return Ok(seed);
        }
        match std::env::var(SEED_ENV_VAR) {
            Ok(raw) => raw
                .parse::<u64>()
                .map_err(|e| Error::Config(format!("{SEED_ENV_VAR}={raw:?} is not a u64: {e}"))),
            Err(std::env::VarError::NotPresent) => Ok(self.run.seed),
            Err(e) => Err(Error::Config(format!("{SEED_ENV_VAR}: {e}"))),
        }
    }

    pub fn pipeline_params(&self) -> Result<PipelineParams> {
        let params = PipelineParams {
            reweight: ReweightConfig {
                step_size: self.run.step_size,
                smoothing: self.run.smoothing,
                total_steps: self.run.total_steps,
                batch_size: self.run.batch_size,
                eval_interval: self.run.eval_interval,
                max_example_tokens: self.run.max_example_tokens,
            },
            initial_alpha: MixtureWeights::new(self.run.initial_alpha.clone())?,
            static_alpha: self
                .run
                .static_alpha
                .clone()
                .map(MixtureWeights::new)
                .transpose()?,
            seed: self.run.seed,
            checkpoint_accuracy_factor: self.run.checkpoint_accuracy_factor,
        };
        params.validate()?;
        Ok(params)
    }
}
