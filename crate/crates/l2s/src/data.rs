//! Training-pool ingestion, validation, and mixture-weighted batch sampling.
//!
//! Pools are line-delimited JSON, one instruction pair per line. Loading
//! recomputes token counts under the configured tokenizer, rejects oversized
//! examples into a load report, and fails hard on malformed lines and
//! duplicate ids. Pools are immutable after load; batch sampling is a pure
//! function of (pool contents, weights, batch size, seed, step), so batches
//! are byte-identical across runs, platforms, and thread counts.

use std::collections::BTreeSet;
use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{token_count, Tokenizer};
use crate::mixture::MixtureWeights;
use crate::rng;

/// Which pool an instruction pair belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemTag {
    /// Short chain-of-thought on simple questions.
    System1,
    /// Long chain-of-thought on hard questions.
    System2,
}

impl fmt::Display for SystemTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SystemTag::System1 => write!(f, "system1"),
            SystemTag::System2 => write!(f, "system2"),
        }
    }
}

/// Difficulty stratum of the question behind a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

/// One <question, response> training example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionPair {
    pub id: String,
    pub question: String,
    pub response: String,
    #[serde(rename = "system")]
    pub system_tag: SystemTag,
    /// Name of the originating dataset (drives difficulty tagging).
    pub source: String,
    pub correct: bool,
    #[serde(default)]
    pub difficulty: Option<Difficulty>,
    /// Token count of `response` under the configured tokenizer.
    pub token_count: u64,
}

/// Raw on-disk record; `token_count` is optional in the file and checked
/// against the recomputed value when present.
#[derive(Debug, Deserialize)]
struct RawPair {
    id: String,
    question: String,
    response: String,
    system: SystemTag,
    source: String,
    correct: bool,
    #[serde(default)]
    difficulty: Option<Difficulty>,
    #[serde(default)]
    token_count: Option<u64>,
}

/// What happened during a pool load, beyond the surviving pairs.
#[derive(Debug, Clone, Default, Serialize)]
pub struct LoadReport {
    /// Pairs that passed every check.
    pub loaded: usize,
    /// Ids rejected because their response exceeds the token cap.
    pub oversized: Vec<String>,
}

/// Load and validate one training pool.
///
/// Every record must carry the expected `system` tag. Token counts are
/// recomputed under `tokenizer` (or, in external mode, taken from the file)
/// and records longer than `max_tokens` are dropped into the load report.
pub fn load_pool(
    path: &Path,
    tag: SystemTag,
    tokenizer: Tokenizer,
    max_tokens: usize,
) -> Result<(Vec<InstructionPair>, LoadReport)> {
    let text = fs::read_to_string(path)?;
    let mut pairs = Vec::new();
    let mut report = LoadReport::default();
    let mut seen_ids: HashSet<String> = HashSet::new();
    let path_str = path.display().to_string();

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawPair = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path_str.clone(),
            line: line_no,
            message: e.to_string(),
        })?;
        if raw.system != tag {
            return Err(Error::Parse {
                path: path_str.clone(),
                line: line_no,
                message: format!("record {:?} is tagged {}, expected {}", raw.id, raw.system, tag),
            });
        }
        if !seen_ids.insert(raw.id.clone()) {
            return Err(Error::DuplicateId {
                path: path_str.clone(),
                line: line_no,
                id: raw.id,
            });
        }
        let count = token_count(&raw.response, tokenizer, raw.token_count).map_err(|_| {
            Error::MissingTokenCount { id: raw.id.clone() }
        })?;
        if tokenizer != Tokenizer::External {
            if let Some(stored) = raw.token_count {
                if stored != count {
                    return Err(Error::TokenCountMismatch {
                        id: raw.id,
                        stored,
                        recomputed: count,
                    });
                }
            }
        }
        if count as usize > max_tokens {
            report.oversized.push(raw.id);
            continue;
        }
        pairs.push(InstructionPair {
            id: raw.id,
            question: raw.question,
            response: raw.response,
            system_tag: raw.system,
            source: raw.source,
            correct: raw.correct,
            difficulty: raw.difficulty,
            token_count: count,
        });
    }
    report.loaded = pairs.len();
    Ok((pairs, report))
}

/// One dev-set prompt with its reference answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DevPrompt {
    pub id: String,
    pub question: String,
    pub answer: String,
}

/// Load the dev set (line-delimited JSON: id, question, answer).
pub fn load_dev_set(path: &Path) -> Result<Vec<DevPrompt>> {
    let text = fs::read_to_string(path)?;
    let path_str = path.display().to_string();
    let mut prompts = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let prompt: DevPrompt = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path_str.clone(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        if !seen.insert(prompt.id.clone()) {
            return Err(Error::DuplicateId {
                path: path_str.clone(),
                line: idx + 1,
                id: prompt.id,
            });
        }
        prompts.push(prompt);
    }
    Ok(prompts)
}

/// Keep exactly the pairs whose response was judged correct, in order.
pub fn filter_correct(pairs: Vec<InstructionPair>) -> Vec<InstructionPair> {
    pairs.into_iter().filter(|p| p.correct).collect()
}

/// Assign difficulty from a source-dataset -> difficulty rule table.
///
/// Fails listing every source that has no rule.
pub fn tag_by_difficulty(
    pairs: Vec<InstructionPair>,
    rules: &std::collections::BTreeMap<String, Difficulty>,
) -> Result<Vec<InstructionPair>> {
    let unknown: BTreeSet<&str> = pairs
        .iter()
        .filter(|p| !rules.contains_key(&p.source))
        .map(|p| p.source.as_str())
        .collect();
    if !unknown.is_empty() {
        let list: Vec<&str> = unknown.into_iter().collect();
        return Err(Error::UnknownSources(list.join(", ")));
    }
    Ok(pairs
        .into_iter()
        .map(|mut p| {
            p.difficulty = Some(rules[&p.source]);
            p
        })
        .collect())
}

/// The two training pools plus the dev set.
#[derive(Debug, Clone, Default)]
pub struct DataPool {
    pub system1: Vec<InstructionPair>,
    pub system2: Vec<InstructionPair>,
    pub dev_set: Vec<DevPrompt>,
}

impl DataPool {
    pub fn pool(&self, tag: SystemTag) -> &[InstructionPair] {
        match tag {
            SystemTag::System1 => &self.system1,
            SystemTag::System2 => &self.system2,
        }
    }

    /// Checks required before a training run may start.
    pub fn validate_for_run(&self) -> Result<()> {
        if self.system1.is_empty() {
            return Err(Error::InvalidArgument("system1 pool is empty".into()));
        }
        if self.system2.is_empty() {
            return Err(Error::InvalidArgument("system2 pool is empty".into()));
        }
        if self.dev_set.is_empty() {
            return Err(Error::InvalidArgument("dev set is empty".into()));
        }
        Ok(())
    }
}

/// One sampled training batch.
#[derive(Debug, Clone)]
pub struct Batch {
    pub examples: Vec<InstructionPair>,
    /// Fraction of slots that drew from the System-1 pool.
    pub realized_fraction_sys1: f64,
}

const SOURCE_STREAM: u64 = 0;
const INDEX_STREAM: u64 = 1;

/// Draw the (source, within-pool index) pair for one batch slot.
#[inline]
fn draw_slot(alpha: &[f64], pool_lens: &[usize], seed: u64, step: u64, slot: u64) -> (usize, usize) {
    let u = rng::unit_f64(rng::hash_parts(&[seed, step, slot, SOURCE_STREAM]));
    let mut source = alpha.len() - 1;
    let mut cdf = 0.0;
    for (i, a) in alpha.iter().enumerate() {
        cdf += a;
        if u < cdf {
            source = i;
            break;
        }
    }
    let h = rng::hash_parts(&[seed, step, slot, INDEX_STREAM]);
    (source, rng::bounded(h, pool_lens[source]))
}

/// Sample a batch of `batch_size` examples under mixture weights `alpha`.
///
/// Each slot independently draws its source with probability `alpha`, then an
/// example uniformly with replacement from that pool. The draw for slot `i`
/// depends only on `(seed, step, i)`, never on other slots or threads.
pub fn sample_batch(
    pool: &DataPool,
    alpha: &MixtureWeights,
    batch_size: usize,
    seed: u64,
    step: u64,
) -> Result<Batch> {
    if alpha.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: alpha.len(),
        });
    }
    if pool.system1.is_empty() || pool.system2.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot sample from an empty pool".into(),
        ));
    }
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be positive".into()));
    }

    let weights = alpha.as_slice();
    let pool_lens = [pool.system1.len(), pool.system2.len()];

    #[cfg(feature = "parallel")]
    let draws: Vec<(usize, usize)> = (0..batch_size as u64)
        .into_par_iter()
        .map(|slot| draw_slot(weights, &pool_lens, seed, step, slot))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let draws: Vec<(usize, usize)> = (0..batch_size as u64)
        .map(|slot| draw_slot(weights, &pool_lens, seed, step, slot))
        .collect();

    let sys1_draws = draws.iter().filter(|(source, _)| *source == 0).count();
    let examples = draws
        .into_iter()
        .map(|(source, idx)| {
            let tag = if source == 0 {
                SystemTag::System1
            } else {
                SystemTag::System2
            };
            pool.pool(tag)[idx].clone()
        })
        .collect();

    Ok(Batch {
        examples,
        realized_fraction_sys1: sys1_draws as f64 / batch_size as f64,
    })
}
