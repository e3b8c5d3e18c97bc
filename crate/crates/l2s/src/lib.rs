//! Long-to-short dynamic data reweighting.
//!
//! Post-training a long chain-of-thought model on a mix of short-CoT
//! (System-1) and long-CoT (System-2) instruction data compresses its
//! reasoning, but the right mix drifts as training progresses. This crate
//! implements the closed loop that tracks it: estimate the efficiency and
//! accuracy bounds from a short and a long reference model, measure the
//! proxy model on a dev set at a fixed cadence, convert the remaining gaps
//! into per-source benefit signals, and push the sampling mixture around the
//! probability simplex with a smoothed multiplicative update.
//!
//! The crate ships:
//!
//! - [`mixture`]: simplex weights, the multiplicative update, averaging;
//! - [`benefit`]: ability bounds and clamped benefit estimators;
//! - [`data`]: pool ingestion, validation, and deterministic
//!   mixture-weighted batch sampling;
//! - [`sim`]: a synthetic proxy trainer for desk-scale closed-loop runs;
//! - [`metrics`]: compression/normalization ratios, result aggregation,
//!   and thinking-pattern keyword counts;
//! - [`trainer`] and [`pipeline`]: the loop itself, against either the
//!   simulator or an external trainer speaking line-delimited JSON;
//! - [`config`]: the TOML run configuration.
//!
//! With the default `parallel` feature, batch sampling and the metric
//! aggregations fan out over rayon; disabling it falls back to the
//! sequential cores with bit-identical results.

pub mod benefit;
pub mod config;
pub mod data;
pub mod error;
pub mod metrics;
pub mod mixture;
pub mod pipeline;
pub mod rng;
pub mod sim;
pub mod trainer;

pub use benefit::{
    accuracy_score, benefit_signal, efficiency_score, estimate_bounds, objective, AbilityBounds,
    ReferenceProfile, ValidationReport,
};
pub use config::RunConfig;
pub use data::{filter_correct, load_pool, sample_batch, Batch, DataPool, InstructionPair, SystemTag};
pub use error::{Error, Result};
pub use metrics::{
    avg_compression_rate, compression_rate, keyword_frequency, normalized_accuracy,
    normalized_token, summarize, token_count, BenchmarkSummary, EvalRecord, KeywordProfile,
    Tokenizer,
};
pub use mixture::{
    average_weights, eg_update, validate_simplex, BenefitSignal, MixtureWeights, ReweightConfig,
};
pub use pipeline::{run_loop, run_pipeline, select_checkpoint, CheckpointRecord, RunLog};
pub use sim::{evaluate, reference_reports, train_step, ProxyState, ResponseSurface};
pub use trainer::{ExternalTrainer, SimulatedTrainer, TrainerBackend};
