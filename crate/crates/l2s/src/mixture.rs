//! Simplex-constrained mixture weights and the multiplicative update.
//!
//! The sampling mixture over data sources lives on the probability simplex.
//! Each evaluation round scales every weight by `exp(step_size * benefit)`,
//! renormalizes, and blends with the uniform vector under a smoothing
//! parameter, which keeps every source's probability at or above
//! `smoothing / k` no matter how lopsided the benefit signal gets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on the sum-to-one check.
pub const SIMPLEX_SUM_TOLERANCE: f64 = 1e-12;

/// True iff `weights` is a valid simplex point: every entry finite and
/// non-negative, entries summing to one within [`SIMPLEX_SUM_TOLERANCE`].
pub fn validate_simplex(weights: &[f64]) -> bool {
    if weights.is_empty() {
        return false;
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return false;
    }
    let sum: f64 = weights.iter().sum();
    (sum - 1.0).abs() <= SIMPLEX_SUM_TOLERANCE
}

/// A point on the probability simplex over `k >= 2` data sources.
///
/// Valid by construction: [`MixtureWeights::new`] rejects anything that is
/// not a simplex point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureWeights {
    weights: Vec<f64>,
}

impl MixtureWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "mixture needs at least 2 sources, got {}",
                weights.len()
            )));
        }
        if !validate_simplex(&weights) {
            return Err(Error::InvalidArgument(format!(
                "not a simplex point: {weights:?}"
            )));
        }
        Ok(Self { weights })
    }

    /// The uniform mixture `(1/k, ..., 1/k)`.
    pub fn uniform(k: usize) -> Result<Self> {
        Self::new(vec![1.0 / k as f64; k])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, i: usize) -> f64 {
        self.weights[i]
    }
}

impl std::fmt::Display for MixtureWeights {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.weights.iter().map(|w| format!("{w:.6}")).collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// Per-source benefit estimates. Entries are finite and non-negative
/// (the estimators clamp at zero; there is no upper cap).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenefitSignal {
    lambdas: Vec<f64>,
}

impl BenefitSignal {
    pub fn new(lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::InvalidArgument("empty benefit signal".into()));
        }
        if lambdas.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "benefit entries must be finite and non-negative: {lambdas:?}"
            )));
        }
        Ok(Self { lambdas })
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.lambdas
    }
}

/// Hyperparameters of one reweighting run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReweightConfig {
    /// Multiplicative step size applied to the benefit signal.
    pub step_size: f64,
    /// Blend toward the uniform mixture, in `[0, 1]`.
    pub smoothing: f64,
    /// Total training steps. Zero means "evaluate once and stop".
    pub total_steps: u64,
    /// Examples per training batch.
    pub batch_size: usize,
    /// Training steps between validation passes.
    pub eval_interval: u64,
    /// Cap on the token length of any training example.
    pub max_example_tokens: usize,
}

impl ReweightConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "step_size must be positive, got {}",
                self.step_size
            )));
        }
        if !(0.0..=1.0).contains(&self.smoothing) {
            return Err(Error::InvalidArgument(format!(
                "smoothing must lie in [0, 1], got {}",
                self.smoothing
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be positive".into()));
        }
        if self.eval_interval == 0 {
            return Err(Error::InvalidArgument(
                "eval_interval must be positive".into(),
            ));
        }
        if self.total_steps > 0 && self.eval_interval > self.total_steps {
            return Err(Error::InvalidArgument(format!(
                "eval_interval {} exceeds total_steps {}",
                self.eval_interval, self.total_steps
            )));
        }
        if self.max_example_tokens == 0 {
            return Err(Error::InvalidArgument(
                "max_example_tokens must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One multiplicative-weights round: scale each weight by
/// `exp(step_size * benefit[i])`, renormalize, then blend with uniform:
/// `out = (1 - smoothing) * normalized + smoothing / k`.
///
/// Internally works on shifted log-weights so that arbitrarily large
/// `step_size * benefit` products renormalize instead of overflowing.
pub fn eg_update(
    alpha: &MixtureWeights,
    benefit: &BenefitSignal,
    step_size: f64,
    smoothing: f64,
) -> Result<MixtureWeights> {
    if alpha.len() != benefit.len() {
        return Err(Error::DimensionMismatch {
            expected: alpha.len(),
            got: benefit.len(),
        });
    }
    if !(step_size.is_finite() && step_size > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "step_size must be positive and finite, got {step_size}"
        )));
    }
    if !(0.0..=1.0).contains(&smoothing) {
        return Err(Error::InvalidArgument(format!(
            "smoothing must lie in [0, 1], got {smoothing}"
        )));
    }

    let k = alpha.len();
    // log alpha_i + step * lambda_i; ln(0) = -inf is fine, the entry stays 0.
    let mut log_w = Vec::with_capacity(k);
    for (a, l) in alpha.as_slice().iter().zip(benefit.as_slice()) {
        let scaled = step_size * l;
        if !scaled.is_finite() {
            return Err(Error::NumericOverflow(format!(
                "step_size * benefit = {step_size} * {l} is not finite"
            )));
        }
        log_w.push(a.ln() + scaled);
    }
    // Some alpha entry is positive, so the max is finite.
    let max_log = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|lw| (lw - max_log).exp()).collect();
    let sum: f64 = w.iter().sum();
    if !sum.is_finite() || sum <= 0.0 {
        return Err(Error::NumericOverflow(format!(
            "weight normalizer degenerated to {sum}"
        )));
    }

    let uniform = 1.0 / k as f64;
    let out: Vec<f64> = w
        .iter()
        .map(|wi| (1.0 - smoothing) * (wi / sum) + smoothing * uniform)
        .collect();
    MixtureWeights::new(out)
}

/// Entrywise arithmetic mean of a weight history.
pub fn average_weights(history: &[MixtureWeights]) -> Result<MixtureWeights> {
    let first = history
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty weight history".into()))?;
    let k = first.len();
    let mut acc = vec![0.0; k];
    for w in history {
        if w.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: w.len(),
            });
        }
        for (a, x) in acc.iter_mut().zip(w.as_slice()) {
            *a += x;
        }
    }
    let n = history.len() as f64;
    MixtureWeights::new(acc.into_iter().map(|a| a / n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn weights(v: &[f64]) -> MixtureWeights {
        MixtureWeights::new(v.to_vec()).unwrap()
    }

    fn signal(v: &[f64]) -> BenefitSignal {
        BenefitSignal::new(v.to_vec()).unwrap()
    }

    #[test]
    fn zero_benefit_is_a_fixed_point() {
        let out = eg_update(&weights(&[0.5, 0.5]), &signal(&[0.0, 0.0]), 0.1, 1e-4).unwrap();
        assert!((out.get(0) - 0.5).abs() <= 1e-15);
        assert!((out.get(1) - 0.5).abs() <= 1e-15);

        let skew = weights(&[0.9, 0.1]);
        let out = eg_update(&skew, &signal(&[0.0, 0.0]), 1.0, 0.0).unwrap();
        assert!((out.get(0) - 0.9).abs() <= 1e-15);
        assert!((out.get(1) - 0.1).abs() <= 1e-15);
    }

    #[test]
    fn hand_computed_update_without_smoothing() {
        // alpha' = (0.5 * 3, 0.5) = (1.5, 0.5) -> (0.75, 0.25)
        let out = eg_update(
            &weights(&[0.5, 0.5]),
            &signal(&[1.0, 0.0]),
            3.0f64.ln(),
            0.0,
        )
        .unwrap();
        assert!((out.get(0) - 0.75).abs() <= 1e-12, "{out}");
        assert!((out.get(1) - 0.25).abs() <= 1e-12, "{out}");
    }

    #[test]
    fn hand_computed_smoothing_blend() {
        // 0.8 * (0.9, 0.1) + 0.2 * (0.5, 0.5) = (0.82, 0.18)
        let out = eg_update(&weights(&[0.9, 0.1]), &signal(&[0.0, 0.0]), 1.0, 0.2).unwrap();
        assert!((out.get(0) - 0.82).abs() <= 1e-12, "{out}");
        assert!((out.get(1) - 0.18).abs() <= 1e-12, "{out}");
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let err = eg_update(&weights(&[0.5, 0.5]), &signal(&[1.0, 0.0, 0.0]), 1.0, 0.0);
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn infinite_scaled_benefit_is_an_overflow_error() {
        let err = eg_update(&weights(&[0.5, 0.5]), &signal(&[f64::MAX, 0.0]), 2.0, 0.0);
        assert!(matches!(err, Err(Error::NumericOverflow(_))));
    }

    #[test]
    fn huge_but_finite_benefit_renormalizes_instead_of_overflowing() {
        let out = eg_update(&weights(&[0.5, 0.5]), &signal(&[5000.0, 0.0]), 1.0, 0.0).unwrap();
        assert!((out.get(0) - 1.0).abs() <= 1e-12);
        assert!(out.get(1).abs() <= 1e-12);
    }

    #[test]
    fn zero_weight_stays_zero_without_smoothing() {
        let out = eg_update(&weights(&[1.0, 0.0]), &signal(&[0.0, 1000.0]), 1.0, 0.0).unwrap();
        assert_eq!(out.get(0), 1.0);
        assert_eq!(out.get(1), 0.0);
    }

    #[test]
    fn full_smoothing_returns_uniform() {
        let out = eg_update(&weights(&[0.9, 0.1]), &signal(&[3.0, 0.0]), 1.0, 1.0).unwrap();
        assert_eq!(out.get(0), 0.5);
        assert_eq!(out.get(1), 0.5);
    }

    #[test]
    fn validate_simplex_examples() {
        assert!(validate_simplex(&[0.5, 0.5]));
        assert!(!validate_simplex(&[0.6, 0.6]));
        assert!(!validate_simplex(&[1.0, -1e-13]));
        assert!(!validate_simplex(&[]));
        assert!(!validate_simplex(&[f64::NAN, 1.0]));
    }

    #[test]
    fn average_weights_examples() {
        let avg = average_weights(&[weights(&[1.0, 0.0]), weights(&[0.0, 1.0])]).unwrap();
        assert_eq!(avg.as_slice(), &[0.5, 0.5]);

        let avg = average_weights(&[weights(&[0.5, 0.5])]).unwrap();
        assert_eq!(avg.as_slice(), &[0.5, 0.5]);

        let avg = average_weights(&[
            weights(&[0.75, 0.25]),
            weights(&[0.85, 0.15]),
            weights(&[0.8, 0.2]),
        ])
        .unwrap();
        assert!((avg.get(0) - 0.8).abs() <= 1e-12);
        assert!((avg.get(1) - 0.2).abs() <= 1e-12);
    }

    #[test]
    fn average_weights_rejects_empty_history() {
        assert!(matches!(
            average_weights(&[]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn mixture_rejects_singleton() {
        assert!(MixtureWeights::new(vec![1.0]).is_err());
    }

    #[test]
    fn reweight_config_validation() {
        let good = ReweightConfig {
            step_size: 1.0,
            smoothing: 1e-4,
            total_steps: 2000,
            batch_size: 32,
            eval_interval: 32,
            max_example_tokens: 8192,
        };
        assert!(good.validate().is_ok());
        // Zero steps is the evaluate-once degenerate run.
        assert!(ReweightConfig { total_steps: 0, ..good }.validate().is_ok());
        assert!(ReweightConfig { step_size: 0.0, ..good }.validate().is_err());
        assert!(ReweightConfig { smoothing: 1.5, ..good }.validate().is_err());
        assert!(ReweightConfig { eval_interval: 0, ..good }.validate().is_err());
        // The interval may not exceed a positive horizon.
        assert!(ReweightConfig {
            total_steps: 16,
            eval_interval: 32,
            ..good
        }
        .validate()
        .is_err());
        assert!(ReweightConfig { batch_size: 0, ..good }.validate().is_err());
        assert!(ReweightConfig { max_example_tokens: 0, ..good }.validate().is_err());
    }

    /// Normalize raw positives into a simplex point.
    fn normalize(raw: &[f64]) -> MixtureWeights {
        let sum: f64 = raw.iter().sum();
        MixtureWeights::new(raw.iter().map(|r| r / sum).collect()).unwrap()
    }

    proptest! {
        #[test]
        fn update_output_is_a_valid_smoothed_simplex_point(
            k in 2usize..8,
            alpha_raw in prop::collection::vec(1e-6..1.0f64, 8),
            lam_raw in prop::collection::vec(0.0..50.0f64, 8),
            eta in 1e-3..10.0f64,
            c in 0.0..1.0f64,
        ) {
            let alpha = normalize(&alpha_raw[..k]);
            let lam = BenefitSignal::new(lam_raw[..k].to_vec()).unwrap();
            let out = eg_update(&alpha, &lam, eta, c).unwrap();
            let sum: f64 = out.as_slice().iter().sum();
            prop_assert!((sum - 1.0).abs() <= SIMPLEX_SUM_TOLERANCE);
            let floor = c / k as f64;
            for &w in out.as_slice() {
                // Tiny slack: the blend arithmetic can land one ulp below c/k.
                prop_assert!(w >= floor - 1e-15, "{w} < {floor}");
            }
        }

        #[test]
        fn raising_one_benefit_raises_that_weight(
            k in 2usize..6,
            alpha_raw in prop::collection::vec(1e-3..1.0f64, 6),
            base in prop::collection::vec(0.0..10.0f64, 6),
            i_raw in 0usize..6,
            bump in 0.01..5.0f64,
        ) {
            let alpha = normalize(&alpha_raw[..k]);
            let i = i_raw % k;
            let base = base[..k].to_vec();
            let mut bumped = base.clone();
            bumped[i] += bump;
            let lo = eg_update(&alpha, &BenefitSignal::new(base).unwrap(), 1.0, 0.0).unwrap();
            let hi = eg_update(&alpha, &BenefitSignal::new(bumped).unwrap(), 1.0, 0.0).unwrap();
            prop_assert!(hi.get(i) > lo.get(i));
        }

        #[test]
        fn step_size_scales_like_scaled_benefit(
            eta in 1e-3..20.0f64,
            l0 in 0.0..10.0f64,
            l1 in 0.0..10.0f64,
            a0 in 0.01..0.99f64,
        ) {
            let alpha = MixtureWeights::new(vec![a0, 1.0 - a0]).unwrap();
            let via_eta = eg_update(&alpha, &BenefitSignal::new(vec![l0, l1]).unwrap(), eta, 0.0).unwrap();
            let via_scaled = eg_update(&alpha, &BenefitSignal::new(vec![eta * l0, eta * l1]).unwrap(), 1.0, 0.0).unwrap();
            for i in 0..2 {
                prop_assert!((via_eta.get(i) - via_scaled.get(i)).abs() <= 1e-12);
            }
        }

        #[test]
        fn average_stays_in_convex_hull(
            raws in prop::collection::vec(prop::collection::vec(1e-3..1.0f64, 3), 1..10),
        ) {
            let hist: Vec<MixtureWeights> = raws.iter().map(|raw| normalize(raw)).collect();
            let avg = average_weights(&hist).unwrap();
            for i in 0..3 {
                let lo = hist.iter().map(|w| w.get(i)).fold(f64::INFINITY, f64::min);
                let hi = hist.iter().map(|w| w.get(i)).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(avg.get(i) >= lo - 1e-12 && avg.get(i) <= hi + 1e-12);
            }
        }
    }
}
