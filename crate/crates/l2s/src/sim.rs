//! Deterministic synthetic proxy trainer.
//!
//! Stands in for the real fine-tuning loop at desk scale: validation
//! accuracy and token length respond to cumulative System-1/System-2
//! exposure through a saturating response surface whose endpoints coincide
//! with the two reference models. With zero exposure the proxy reports
//! exactly the long reference; unbounded System-1 exposure alone collapses
//! it to the short reference (fast but less accurate); exposure to both
//! drives it toward the ideal corner (short tokens, long-model accuracy).

use serde::{Deserialize, Serialize};

use crate::benefit::{ReferenceProfile, ValidationReport};
use crate::data::{Batch, SystemTag};
use crate::error::{Error, Result};
use crate::rng;

/// Nominal dev-set size reported by simulated evaluations.
pub const SIM_DEV_SAMPLES: u64 = 512;

const TOKEN_NOISE_STREAM: u64 = 101;
const ACC_NOISE_STREAM: u64 = 102;

/// Cumulative, scale-normalized exposure of the proxy to each data source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxyState {
    pub exposure_sys1: f64,
    pub exposure_sys2: f64,
    pub step: u64,
}

impl ProxyState {
    pub fn initial() -> Self {
        Self {
            exposure_sys1: 0.0,
            exposure_sys2: 0.0,
            step: 0,
        }
    }
}

/// Parameters of the simulated response surface.
///
/// `(tok_long, acc_long)` is the untrained endpoint (the long reference);
/// `(tok_short, acc_short)` the System-1-saturated endpoint (the short
/// reference). `rate_token`/`rate_acc` set how fast exposure moves the proxy
/// between them, with exposures measured in units of `exposure_scale`
/// examples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResponseSurface {
    pub acc_long: f64,
    pub acc_short: f64,
    pub tok_long: f64,
    pub tok_short: f64,
    pub rate_token: f64,
    pub rate_acc: f64,
    pub noise_sd_acc: f64,
    pub noise_sd_tok: f64,
    pub exposure_scale: f64,
}

impl Default for ResponseSurface {
    fn default() -> Self {
        Self {
            acc_long: 0.75,
            acc_short: 0.40,
            tok_long: 1300.0,
            tok_short: 300.0,
            rate_token: 3.0,
            rate_acc: 2.0,
            noise_sd_acc: 0.01,
            noise_sd_tok: 10.0,
            exposure_scale: 1000.0,
        }
    }
}

impl ResponseSurface {
    /// Zero-noise copy, for analytic runs and sweeps.
    pub fn noiseless(mut self) -> Self {
        self.noise_sd_acc = 0.0;
        self.noise_sd_tok = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("acc_long", self.acc_long),
            ("acc_short", self.acc_short),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        if self.acc_long <= self.acc_short {
            return Err(Error::InvalidArgument(format!(
                "acc_long {} must exceed acc_short {}",
                self.acc_long, self.acc_short
            )));
        }
        if !(self.tok_short > 0.0 && self.tok_long > self.tok_short) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < tok_short < tok_long, got {} and {}",
                self.tok_short, self.tok_long
            )));
        }
        if !(self.rate_token > 0.0 && self.rate_acc > 0.0) {
            return Err(Error::InvalidArgument("rates must be positive".into()));
        }
        if self.noise_sd_acc < 0.0 || self.noise_sd_tok < 0.0 {
            return Err(Error::InvalidArgument(
                "noise standard deviations must be non-negative".into(),
            ));
        }
        if !self.exposure_scale.is_finite() || self.exposure_scale <= 0.0 {
            return Err(Error::InvalidArgument(
                "exposure_scale must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Noiseless (mean_tokens, mean_accuracy) at the given exposures.
    ///
    /// Tokens decay from `tok_long` to `tok_short` with System-1 exposure and
    /// ignore System-2 exposure; accuracy loses up to the long-short gap as
    /// System-1 exposure saturates, and System-2 exposure wins it back.
    pub fn response(&self, exposure_sys1: f64, exposure_sys2: f64) -> (f64, f64) {
        let token_decay = (-self.rate_token * exposure_sys1).exp();
        let tokens = self.tok_short + (self.tok_long - self.tok_short) * token_decay;
        let accuracy = self.acc_long
            - (self.acc_long - self.acc_short) * (1.0 - token_decay)
                * (-self.rate_acc * exposure_sys2).exp();
        (tokens, accuracy)
    }
}

/// Account one batch of training into the proxy state.
pub fn train_step(state: &ProxyState, batch: &Batch, surface: &ResponseSurface) -> ProxyState {
    let sys1 = batch
        .examples
        .iter()
        .filter(|e| e.system_tag == SystemTag::System1)
        .count() as f64;
    let sys2 = batch.examples.len() as f64 - sys1;
    ProxyState {
        exposure_sys1: state.exposure_sys1 + sys1 / surface.exposure_scale,
        exposure_sys2: state.exposure_sys2 + sys2 / surface.exposure_scale,
        step: state.step + 1,
    }
}

/// Validation report of the simulated proxy: the surface response at the
/// current exposures, perturbed by seeded Gaussian noise and clamped back
/// into range. Pure in `(state, surface, noise_seed)`.
pub fn evaluate(state: &ProxyState, surface: &ResponseSurface, noise_seed: u64) -> ValidationReport {
    let (mut tokens, mut accuracy) = surface.response(state.exposure_sys1, state.exposure_sys2);
    if surface.noise_sd_tok > 0.0 {
        let z = rng::standard_normal(rng::hash_parts(&[noise_seed, state.step, TOKEN_NOISE_STREAM]));
        tokens += surface.noise_sd_tok * z;
    }
    if surface.noise_sd_acc > 0.0 {
        let z = rng::standard_normal(rng::hash_parts(&[noise_seed, state.step, ACC_NOISE_STREAM]));
        accuracy += surface.noise_sd_acc * z;
    }
    ValidationReport {
        mean_accuracy: accuracy.clamp(0.0, 1.0),
        mean_tokens: tokens.max(0.0),
        sample_count: SIM_DEV_SAMPLES,
        step: state.step,
    }
}

/// The reference pair this surface is calibrated to: its two endpoints.
pub fn reference_reports(surface: &ResponseSurface) -> Result<ReferenceProfile> {
    surface.validate()?;
    let short_ref = ValidationReport::new(surface.acc_short, surface.tok_short, SIM_DEV_SAMPLES, 0)?;
    let long_ref = ValidationReport::new(surface.acc_long, surface.tok_long, SIM_DEV_SAMPLES, 0)?;
    ReferenceProfile::new(short_ref, long_ref)
}
