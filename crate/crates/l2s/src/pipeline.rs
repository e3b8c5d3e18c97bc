//! End-to-end reweighting loop: reference profiling, periodic validation,
//! benefit computation, weight updates, logging, and checkpoint selection.
//!
//! The loop evaluates at step 0, at every `eval_interval` boundary, and at
//! the final step. Each evaluation produces the benefit signal; the mixture
//! updates once per evaluation (unless a static mixture is pinned) and stays
//! constant for the whole window that follows, matching the cadence at which
//! validation signals actually exist. Runs are reproducible: identical
//! config and seed give byte-identical logs.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::benefit::{benefit_signal, estimate_bounds, objective, ReferenceProfile, ValidationReport};
use crate::config::{RunConfig, TrainerKind};
use crate::data::{filter_correct, load_dev_set, load_pool, DataPool, SystemTag};
use crate::error::{Error, Result};
use crate::mixture::{average_weights, eg_update, MixtureWeights, ReweightConfig};
use crate::sim::reference_reports;
use crate::trainer::{ExternalTrainer, SimulatedTrainer, TrainerBackend};

/// Everything the loop itself needs (distilled from a [`RunConfig`]).
#[derive(Debug, Clone)]
pub struct PipelineParams {
    pub reweight: ReweightConfig,
    pub initial_alpha: MixtureWeights,
    /// When set, benefit/weight updates are skipped and this fixed mixture
    /// is used throughout.
    pub static_alpha: Option<MixtureWeights>,
    pub seed: u64,
    /// A checkpoint qualifies if its accuracy is at least this fraction of
    /// the original (long-reference) accuracy.
    pub checkpoint_accuracy_factor: f64,
}

impl PipelineParams {
    pub fn validate(&self) -> Result<()> {
        self.reweight.validate()?;
        if self.initial_alpha.len() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: self.initial_alpha.len(),
            });
        }
        if let Some(s) = &self.static_alpha {
            if s.len() != 2 {
                return Err(Error::DimensionMismatch {
                    expected: 2,
                    got: s.len(),
                });
            }
        }
        if !(self.checkpoint_accuracy_factor > 0.0 && self.checkpoint_accuracy_factor <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "checkpoint_accuracy_factor must lie in (0, 1], got {}",
                self.checkpoint_accuracy_factor
            )));
        }
        Ok(())
    }
}

/// One evaluation checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub checkpoint_id: String,
    pub step: u64,
    pub report: ValidationReport,
}

/// One line of the run log: the state at an evaluation boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLogEntry {
    pub step: u64,
    /// Mixture in effect for the window starting at `step`.
    pub alpha: Vec<f64>,
    pub lambda: Vec<f64>,
    pub report: ValidationReport,
    /// Mixture-weighted gap to the two bounds, from `alpha` and `report`.
    pub objective: f64,
    pub checkpoint_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    /// Mean of the per-entry mixtures, step 0 included.
    pub averaged_alpha: Vec<f64>,
    /// Objective of the final report under the averaged mixture.
    pub final_objective: f64,
    pub selected_checkpoint: CheckpointRecord,
    pub total_steps: u64,
    pub seed: u64,
    pub static_mode: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub entries: Vec<RunLogEntry>,
    pub summary: RunSummary,
}

/// Wrapper that makes the summary line self-describing in the log file.
#[derive(Serialize, Deserialize)]
struct SummaryLine {
    summary: RunSummary,
}

impl RunLog {
    /// Line-delimited JSON: one entry per line, then one summary line.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for entry in &self.entries {
            out.push_str(&serde_json::to_string(entry)?);
            out.push('\n');
        }
        out.push_str(&serde_json::to_string(&SummaryLine {
            summary: self.summary.clone(),
        })?);
        out.push('\n');
        Ok(out)
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_jsonl()?)?;
        Ok(())
    }

    pub fn parse_jsonl(text: &str) -> Result<RunLog> {
        let mut entries = Vec::new();
        let mut summary = None;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            if let Ok(s) = serde_json::from_str::<SummaryLine>(line) {
                summary = Some(s.summary);
            } else {
                entries.push(serde_json::from_str::<RunLogEntry>(line)?);
            }
        }
        Ok(RunLog {
            entries,
            summary: summary
                .ok_or_else(|| Error::InvalidArgument("run log has no summary line".into()))?,
        })
    }
}

/// Among records meeting the accuracy threshold `factor * original_accuracy`,
/// pick the one with the fewest mean tokens; ties go to the earliest step.
pub fn select_checkpoint(
    records: &[CheckpointRecord],
    original_accuracy: f64,
    factor: f64,
) -> Result<CheckpointRecord> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no checkpoint records".into()));
    }
    if !original_accuracy.is_finite() || original_accuracy <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "original accuracy must be positive, got {original_accuracy}"
        )));
    }
    if !(factor > 0.0 && factor <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "accuracy factor must lie in (0, 1], got {factor}"
        )));
    }
    let threshold = factor * original_accuracy;
    let mut best: Option<&CheckpointRecord> = None;
    for record in records {
        if record.report.mean_accuracy < threshold {
            continue;
        }
        match best {
            None => best = Some(record),
            Some(b) => {
                if record.report.mean_tokens < b.report.mean_tokens
                    || (record.report.mean_tokens == b.report.mean_tokens && record.step < b.step)
                {
                    best = Some(record);
                }
            }
        }
    }
    best.cloned()
        .ok_or(Error::NoQualifyingCheckpoint { threshold })
}

/// Drive a trainer through the full loop against a fixed reference profile.
pub fn run_loop(
    params: &PipelineParams,
    trainer: &mut dyn TrainerBackend,
    refs: &ReferenceProfile,
) -> Result<RunLog> {
    params.validate()?;
    let bounds = estimate_bounds(refs.short_ref(), refs.long_ref());
    let total = params.reweight.total_steps;
    let static_mode = params.static_alpha.is_some();
    let mut alpha = params
        .static_alpha
        .clone()
        .unwrap_or_else(|| params.initial_alpha.clone());

    let mut entries: Vec<RunLogEntry> = Vec::new();
    let mut checkpoints: Vec<CheckpointRecord> = Vec::new();
    let mut step: u64 = 0;
    let mut outcome = trainer.evaluate()?;
    loop {
        outcome.report.validate()?;
        let lambda = benefit_signal(&bounds, &outcome.report, refs)?;
        // Benefit first, then the weight update, then the window's training.
        // The update is skipped at the terminal evaluation (nothing follows)
        // and in static mode.
        if step < total && !static_mode {
            alpha = eg_update(
                &alpha,
                &lambda,
                params.reweight.step_size,
                params.reweight.smoothing,
            )?;
        }
        entries.push(RunLogEntry {
            step,
            alpha: alpha.as_slice().to_vec(),
            lambda: lambda.as_slice().to_vec(),
            report: outcome.report,
            objective: objective(&bounds, &outcome.report, &alpha),
            checkpoint_id: outcome.checkpoint_id.clone(),
        });
        checkpoints.push(CheckpointRecord {
            checkpoint_id: outcome.checkpoint_id,
            step,
            report: outcome.report,
        });
        if step >= total {
            break;
        }
        let window = params.reweight.eval_interval.min(total - step);
        trainer.train(window, &alpha)?;
        step += window;
        outcome = trainer.evaluate()?;
    }

    let alphas: Vec<MixtureWeights> = entries
        .iter()
        .map(|e| MixtureWeights::new(e.alpha.clone()))
        .collect::<Result<_>>()?;
    let averaged = average_weights(&alphas)?;
    let final_report = &entries.last().expect("at least the step-0 entry").report;
    let final_objective = objective(&bounds, final_report, &averaged);
    let selected = select_checkpoint(
        &checkpoints,
        refs.long_ref().mean_accuracy,
        params.checkpoint_accuracy_factor,
    )?;
    trainer.shutdown()?;

    Ok(RunLog {
        summary: RunSummary {
            averaged_alpha: averaged.as_slice().to_vec(),
            final_objective,
            selected_checkpoint: selected,
            total_steps: total,
            seed: params.seed,
            static_mode,
        },
        entries,
    })
}

/// Assemble backend and references from a config and run the loop.
///
/// Simulated runs load both pools, keep only the correct responses, and
/// profile the references off the surface endpoints. External runs take the
/// reference profile from the config and leave data handling to the child.
pub fn run_pipeline(config: &RunConfig) -> Result<RunLog> {
    let params = config.pipeline_params()?;
    match config.run.trainer {
        TrainerKind::Simulated => {
            let data = config.data.as_ref().ok_or_else(|| {
                Error::Config("simulated trainer needs a [data] section".into())
            })?;
            let max_tokens = params.reweight.max_example_tokens;
            let (sys1, report1) = load_pool(
                &data.system1,
                SystemTag::System1,
                data.tokenizer,
                max_tokens,
            )?;
            if !report1.oversized.is_empty() {
                log::warn!(
                    "system1 pool: {} oversized records rejected",
                    report1.oversized.len()
                );
            }
            let (sys2, report2) = load_pool(
                &data.system2,
                SystemTag::System2,
                data.tokenizer,
                max_tokens,
            )?;
            if !report2.oversized.is_empty() {
                log::warn!(
                    "system2 pool: {} oversized records rejected",
                    report2.oversized.len()
                );
            }
            let pool = DataPool {
                system1: filter_correct(sys1),
                system2: filter_correct(sys2),
                dev_set: load_dev_set(&data.dev)?,
            };
            pool.validate_for_run()?;
            let refs = reference_reports(&config.surface)?;
            let mut trainer = SimulatedTrainer::new(
                pool,
                config.surface,
                params.reweight.batch_size,
                params.seed,
            )?;
            run_loop(&params, &mut trainer, &refs)
        }
        TrainerKind::External => {
            let ext = config.external.as_ref().ok_or_else(|| {
                Error::Config("external trainer needs an [external] section".into())
            })?;
            let refs = ext.reference_profile()?;
            let mut trainer = ExternalTrainer::spawn(
                &ext.command,
                Duration::from_secs(ext.timeout_secs),
                params.seed,
            )?;
            run_loop(&params, &mut trainer, &refs)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::tests::tiny_pool;
    use crate::sim::ResponseSurface;
    use crate::trainer::EvalOutcome;

    fn report(acc: f64, tokens: f64, step: u64) -> ValidationReport {
        ValidationReport::new(acc, tokens, 512, step).unwrap()
    }

    fn checkpoint(step: u64, acc: f64, tokens: f64) -> CheckpointRecord {
        CheckpointRecord {
            checkpoint_id: format!("ckpt-{step}"),
            step,
            report: report(acc, tokens, step),
        }
    }

    pub(crate) fn default_params(total_steps: u64, seed: u64) -> PipelineParams {
        PipelineParams {
            reweight: ReweightConfig {
                step_size: 1.0,
                smoothing: 1e-4,
                total_steps,
                batch_size: 32,
                eval_interval: 32,
                max_example_tokens: 8192,
            },
            initial_alpha: MixtureWeights::new(vec![0.5, 0.5]).unwrap(),
            static_alpha: None,
            seed,
            checkpoint_accuracy_factor: 0.3,
        }
    }

    fn simulated(total_steps: u64, seed: u64, static_alpha: Option<Vec<f64>>) -> RunLog {
        let surface = ResponseSurface::default().noiseless();
        let refs = reference_reports(&surface).unwrap();
        let mut params = default_params(total_steps, seed);
        params.static_alpha = static_alpha.map(|v| MixtureWeights::new(v).unwrap());
        let mut trainer = SimulatedTrainer::new(tiny_pool(), surface, 32, seed).unwrap();
        run_loop(&params, &mut trainer, &refs).unwrap()
    }

    #[test]
    fn zero_step_run_logs_only_the_initial_evaluation() {
        let log = simulated(0, 42, None);
        assert_eq!(log.entries.len(), 1);
        assert_eq!(log.entries[0].step, 0);
        assert_eq!(log.summary.averaged_alpha, vec![0.5, 0.5]);
        assert_eq!(log.summary.selected_checkpoint.step, 0);
    }

    #[test]
    fn step_zero_benefit_is_one_zero() {
        let log = simulated(64, 7, None);
        assert_eq!(log.entries[0].lambda, vec![1.0, 0.0]);
    }

    #[test]
    fn entries_fall_on_boundaries_plus_terminal() {
        let log = simulated(64, 7, None);
        let steps: Vec<u64> = log.entries.iter().map(|e| e.step).collect();
        assert_eq!(steps, vec![0, 32, 64]);

        // Non-divisible horizon: truncated last window, terminal at T.
        let log = simulated(80, 7, None);
        let steps: Vec<u64> = log.entries.iter().map(|e| e.step).collect();
        assert_eq!(steps, vec![0, 32, 64, 80]);
    }

    #[test]
    fn static_mode_pins_the_mixture() {
        let log = simulated(96, 3, Some(vec![0.8, 0.2]));
        assert!(log.summary.static_mode);
        for entry in &log.entries {
            assert_eq!(entry.alpha, vec![0.8, 0.2]);
        }
        assert_eq!(log.summary.averaged_alpha, vec![0.8, 0.2]);
    }

    #[test]
    fn logged_objective_is_recomputable_from_the_entry() {
        let surface = ResponseSurface::default().noiseless();
        let refs = reference_reports(&surface).unwrap();
        let bounds = estimate_bounds(refs.short_ref(), refs.long_ref());
        let log = simulated(128, 11, None);
        for entry in &log.entries {
            let alpha = MixtureWeights::new(entry.alpha.clone()).unwrap();
            let recomputed = objective(&bounds, &entry.report, &alpha);
            assert!((entry.objective - recomputed).abs() <= 1e-12);
        }
    }

    #[test]
    fn mixture_is_constant_within_each_window() {
        // A recording backend observes exactly what the loop hands it.
        struct Recording {
            calls: Vec<(u64, Vec<f64>)>,
            evals: u64,
        }
        impl TrainerBackend for Recording {
            fn train(&mut self, steps: u64, alpha: &MixtureWeights) -> Result<()> {
                self.calls.push((steps, alpha.as_slice().to_vec()));
                Ok(())
            }
            fn evaluate(&mut self) -> Result<EvalOutcome> {
                self.evals += 1;
                Ok(EvalOutcome {
                    report: report(0.6, 800.0, 0),
                    checkpoint_id: format!("c{}", self.evals),
                })
            }
            fn shutdown(&mut self) -> Result<()> {
                Ok(())
            }
        }

        let surface = ResponseSurface::default().noiseless();
        let refs = reference_reports(&surface).unwrap();
        let params = default_params(96, 1);
        let mut rec = Recording { calls: Vec::new(), evals: 0 };
        let log = run_loop(&params, &mut rec, &refs).unwrap();

        assert_eq!(rec.calls.len(), 3);
        for (i, (steps, alpha)) in rec.calls.iter().enumerate() {
            assert_eq!(*steps, 32);
            // The trainer saw the same alpha the log recorded for that window.
            assert_eq!(alpha, &log.entries[i].alpha);
        }
    }

    #[test]
    fn checkpoint_rule_picks_min_tokens_over_the_threshold() {
        let records = vec![
            checkpoint(32, 0.70, 900.0),
            checkpoint(64, 0.68, 600.0),
            checkpoint(96, 0.50, 400.0),
        ];
        // Permissive factor: everything qualifies, min tokens wins.
        let picked = select_checkpoint(&records, 0.72, 0.3).unwrap();
        assert_eq!(picked.step, 96);
        // Strict factor 0.9 (threshold 0.648): only the first two qualify.
        let picked = select_checkpoint(&records, 0.72, 0.9).unwrap();
        assert_eq!(picked.step, 64);
        // Single record above threshold selects itself.
        let only = vec![checkpoint(32, 0.71, 900.0)];
        assert_eq!(select_checkpoint(&only, 0.72, 0.9).unwrap().step, 32);
    }

    #[test]
    fn checkpoint_rule_reports_no_qualifier() {
        let records = vec![checkpoint(32, 0.10, 900.0), checkpoint(64, 0.15, 600.0)];
        let err = select_checkpoint(&records, 0.72, 0.9).unwrap_err();
        assert!(matches!(err, Error::NoQualifyingCheckpoint { .. }));
    }

    #[test]
    fn checkpoint_ties_break_to_the_earliest_step() {
        let records = vec![
            checkpoint(32, 0.70, 600.0),
            checkpoint(64, 0.70, 600.0),
            checkpoint(96, 0.70, 700.0),
        ];
        assert_eq!(select_checkpoint(&records, 0.72, 0.3).unwrap().step, 32);
    }

    #[test]
    fn strictly_improving_history_with_factor_one_leaves_one_qualifier() {
        let records = vec![
            checkpoint(32, 0.50, 900.0),
            checkpoint(64, 0.60, 700.0),
            checkpoint(96, 0.72, 800.0),
        ];
        let picked = select_checkpoint(&records, 0.72, 1.0).unwrap();
        assert_eq!(picked.step, 96);
    }

    #[test]
    fn run_log_round_trips_through_jsonl() {
        let log = simulated(64, 5, None);
        let text = log.to_jsonl().unwrap();
        let parsed = RunLog::parse_jsonl(&text).unwrap();
        assert_eq!(parsed, log);
    }

    #[test]
    fn identical_seeds_give_identical_logs() {
        let a = simulated(160, 9, None);
        let b = simulated(160, 9, None);
        assert_eq!(a, b);
        assert_eq!(a.to_jsonl().unwrap(), b.to_jsonl().unwrap());
        let c = simulated(160, 10, None);
        assert_ne!(a, c);
    }
}
