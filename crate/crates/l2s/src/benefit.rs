//! Benefit estimation: ability bounds from the reference models and the
//! clamped per-source benefit signals that drive the mixture update.
//!
//! Two reference models frame every run: the short-output reference sets the
//! efficiency bound (negated mean token count) and the long-output reference
//! sets the accuracy bound. The proxy model's distance to each bound,
//! normalized by the gap between the two references, is the expected benefit
//! of sampling more of the corresponding data source.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::{BenefitSignal, MixtureWeights};

/// References whose metric gap falls at or below this are degenerate.
pub const DEGENERATE_EPS: f64 = 1e-9;

/// Mean accuracy and mean output length of one model over the dev set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Mean of per-question correctness indicators, in `[0, 1]`.
    pub mean_accuracy: f64,
    /// Mean output token count, non-negative.
    pub mean_tokens: f64,
    /// Number of dev samples behind the means.
    pub sample_count: u64,
    /// Training step at which the measurement was taken.
    pub step: u64,
}

impl ValidationReport {
    pub fn new(mean_accuracy: f64, mean_tokens: f64, sample_count: u64, step: u64) -> Result<Self> {
        let report = Self {
            mean_accuracy,
            mean_tokens,
            sample_count,
            step,
        };
        report.validate()?;
        Ok(report)
    }

    /// Empirical estimator from per-sample correctness flags and token counts.
    pub fn from_samples(correct: &[bool], tokens: &[f64], step: u64) -> Result<Self> {
        if correct.is_empty() || correct.len() != tokens.len() {
            return Err(Error::InvalidArgument(format!(
                "need equal non-zero sample counts, got {} correctness flags and {} token counts",
                correct.len(),
                tokens.len()
            )));
        }
        let n = correct.len() as f64;
        let acc = correct.iter().filter(|c| **c).count() as f64 / n;
        let tok = tokens.iter().sum::<f64>() / n;
        Self::new(acc, tok, correct.len() as u64, step)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mean_accuracy) || !self.mean_accuracy.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "mean_accuracy must lie in [0, 1], got {}",
                self.mean_accuracy
            )));
        }
        if !(self.mean_tokens.is_finite() && self.mean_tokens >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "mean_tokens must be non-negative, got {}",
                self.mean_tokens
            )));
        }
        if self.sample_count == 0 {
            return Err(Error::InvalidArgument(
                "sample_count must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Efficiency score of a model: the negated mean token count, so that
/// "shorter output" means "higher score".
pub fn efficiency_score(report: &ValidationReport) -> f64 {
    -report.mean_tokens
}

/// Accuracy score of a model: its mean dev-set accuracy.
pub fn accuracy_score(report: &ValidationReport) -> f64 {
    report.mean_accuracy
}

/// The two ability bounds a mixed-training run is squeezed toward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbilityBounds {
    /// Efficiency bound: negated mean tokens of the short reference (<= 0).
    pub efficiency_bound: f64,
    /// Accuracy bound: mean accuracy of the long reference, in `[0, 1]`.
    pub accuracy_bound: f64,
}

/// Bounds from the two reference reports: the token floor comes from the
/// short-output reference, the accuracy ceiling from the long-output one.
pub fn estimate_bounds(short_ref: &ValidationReport, long_ref: &ValidationReport) -> AbilityBounds {
    AbilityBounds {
        efficiency_bound: efficiency_score(short_ref),
        accuracy_bound: accuracy_score(long_ref),
    }
}

/// The fixed pair of reference models measured before the loop starts.
///
/// Construction enforces that the pair is informative: the short reference
/// must be strictly shorter and the long reference strictly more accurate,
/// each by more than [`DEGENERATE_EPS`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceProfile {
    short_ref: ValidationReport,
    long_ref: ValidationReport,
}

impl ReferenceProfile {
    pub fn new(short_ref: ValidationReport, long_ref: ValidationReport) -> Result<Self> {
        short_ref.validate()?;
        long_ref.validate()?;
        let token_gap = efficiency_score(&short_ref) - efficiency_score(&long_ref);
        if token_gap <= DEGENERATE_EPS {
            return Err(Error::DegenerateReferences {
                metric: "token",
                denominator: token_gap,
                epsilon: DEGENERATE_EPS,
            });
        }
        let accuracy_gap = accuracy_score(&long_ref) - accuracy_score(&short_ref);
        if accuracy_gap <= DEGENERATE_EPS {
            return Err(Error::DegenerateReferences {
                metric: "accuracy",
                denominator: accuracy_gap,
                epsilon: DEGENERATE_EPS,
            });
        }
        Ok(Self {
            short_ref,
            long_ref,
        })
    }

    pub fn short_ref(&self) -> &ValidationReport {
        &self.short_ref
    }

    pub fn long_ref(&self) -> &ValidationReport {
        &self.long_ref
    }
}

/// Expected benefit of more System-1 (short) data: the proxy's remaining
/// token gap to the efficiency bound, normalized by the reference gap and
/// clamped at zero.
pub fn system1_benefit(
    bounds: &AbilityBounds,
    proxy: &ValidationReport,
    refs: &ReferenceProfile,
) -> Result<f64> {
    let denominator = efficiency_score(refs.short_ref()) - efficiency_score(refs.long_ref());
    if denominator <= DEGENERATE_EPS {
        return Err(Error::DegenerateReferences {
            metric: "token",
            denominator,
            epsilon: DEGENERATE_EPS,
        });
    }
    Ok(((bounds.efficiency_bound - efficiency_score(proxy)) / denominator).max(0.0))
}

/// Expected benefit of more System-2 (long) data: the proxy's remaining
/// accuracy gap to the accuracy bound, normalized and clamped at zero.
pub fn system2_benefit(
    bounds: &AbilityBounds,
    proxy: &ValidationReport,
    refs: &ReferenceProfile,
) -> Result<f64> {
    let denominator = accuracy_score(refs.long_ref()) - accuracy_score(refs.short_ref());
    if denominator <= DEGENERATE_EPS {
        return Err(Error::DegenerateReferences {
            metric: "accuracy",
            denominator,
            epsilon: DEGENERATE_EPS,
        });
    }
    Ok(((bounds.accuracy_bound - accuracy_score(proxy)) / denominator).max(0.0))
}

/// Both benefits as one vector, ordered (System-1, System-2).
pub fn benefit_signal(
    bounds: &AbilityBounds,
    proxy: &ValidationReport,
    refs: &ReferenceProfile,
) -> Result<BenefitSignal> {
    BenefitSignal::new(vec![
        system1_benefit(bounds, proxy, refs)?,
        system2_benefit(bounds, proxy, refs)?,
    ])
}

/// Diagnostic objective: the mixture-weighted sum of unclamped gaps to the
/// two bounds. Logged, never directly minimized; the multiplicative update
/// is the optimization mechanism.
pub fn objective(bounds: &AbilityBounds, proxy: &ValidationReport, alpha: &MixtureWeights) -> f64 {
    let gaps = [
        bounds.efficiency_bound - efficiency_score(proxy),
        bounds.accuracy_bound - accuracy_score(proxy),
    ];
    alpha
        .as_slice()
        .iter()
        .zip(gaps)
        .map(|(a, d)| a * d)
        .sum()
}
