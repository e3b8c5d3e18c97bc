//! Evaluation metrics: token counting, compression and normalization ratios,
//! multi-sample accuracy aggregation, and thinking-pattern keyword counts.
//!
//! All aggregations are sums and means that commute, so the parallel paths
//! (enabled by the `parallel` feature) partition the input and merge
//! order-independently; results are bit-identical to the sequential cores.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Token counting
// ---------------------------------------------------------------------------

/// How response/output texts are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tokenizer {
    /// Maximal non-whitespace runs. The default.
    #[default]
    Whitespace,
    /// Byte length of the text.
    Bytes,
    /// Counts are supplied externally (model tokenizers run elsewhere).
    External,
}

/// Token count of `text` under `tokenizer`. External mode returns the
/// supplied count and fails when none is present.
pub fn token_count(text: &str, tokenizer: Tokenizer, provided: Option<u64>) -> Result<u64> {
    match tokenizer {
        Tokenizer::Whitespace => Ok(text.split_whitespace().count() as u64),
        Tokenizer::Bytes => Ok(text.len() as u64),
        Tokenizer::External => provided.ok_or(Error::MissingTokenCount {
            id: "<unspecified>".to_string(),
        }),
    }
}

// ---------------------------------------------------------------------------
// Compression and normalization ratios
// ---------------------------------------------------------------------------

/// Clamped relative token reduction versus the original model, in `[0, 1]`.
pub fn compression_rate(tokens_original: f64, tokens_current: f64) -> Result<f64> {
    if !(tokens_original.is_finite() && tokens_original > 0.0) {
        return Err(Error::ZeroOriginalTokens(tokens_original));
    }
    Ok(((tokens_original - tokens_current) / tokens_original).max(0.0))
}

/// Mean compression rate over per-benchmark (original, current) pairs.
pub fn avg_compression_rate(per_dataset: &[(f64, f64)]) -> Result<f64> {
    if per_dataset.is_empty() {
        return Err(Error::InvalidArgument(
            "average compression rate needs at least one dataset".into(),
        ));
    }
    let mut sum = 0.0;
    for &(orig, cur) in per_dataset {
        sum += compression_rate(orig, cur)?;
    }
    Ok(sum / per_dataset.len() as f64)
}

/// Accuracy of the current model relative to the original.
pub fn normalized_accuracy(acc_current: f64, acc_original: f64) -> Result<f64> {
    if !(acc_original.is_finite() && acc_original > 0.0) {
        return Err(Error::ZeroOriginalValue(acc_original));
    }
    Ok(acc_current / acc_original)
}

/// Token length of the current model relative to the original.
pub fn normalized_token(tok_current: f64, tok_original: f64) -> Result<f64> {
    if !(tok_original.is_finite() && tok_original > 0.0) {
        return Err(Error::ZeroOriginalValue(tok_original));
    }
    Ok(tok_current / tok_original)
}

// ---------------------------------------------------------------------------
// Result-set aggregation
// ---------------------------------------------------------------------------

/// One sampled model output for one benchmark question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub question_id: String,
    pub sample_index: u32,
    pub output_text: String,
    pub token_count: u64,
    pub correct: bool,
    pub dataset: String,
}

/// Load a results file (line-delimited JSON, one record per line).
/// `(question_id, sample_index, dataset)` must be unique.
pub fn read_records(path: &Path) -> Result<Vec<EvalRecord>> {
    let text = fs::read_to_string(path)?;
    let path_str = path.display().to_string();
    let mut records = Vec::new();
    let mut seen: HashSet<(String, u32, String)> = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: EvalRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path_str.clone(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        let key = (
            record.question_id.clone(),
            record.sample_index,
            record.dataset.clone(),
        );
        if !seen.insert(key) {
            return Err(Error::DuplicateId {
                path: path_str.clone(),
                line: idx + 1,
                id: format!(
                    "{}/{}#{}",
                    record.dataset, record.question_id, record.sample_index
                ),
            });
        }
        records.push(record);
    }
    Ok(records)
}

/// Per-dataset aggregate: accuracy is the mean over questions of the
/// per-question sample-mean correctness; token length is the mean over all
/// samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkSummary {
    pub dataset: String,
    pub mean_accuracy: f64,
    pub mean_tokens: f64,
    pub n_questions: usize,
    /// Samples per question; the maximum when counts are uneven.
    pub samples_per_question: usize,
}

fn summarize_dataset(dataset: &str, by_question: &BTreeMap<&str, Vec<&EvalRecord>>) -> BenchmarkSummary {
    let mut acc_sum = 0.0;
    let mut token_sum = 0.0;
    let mut sample_total = 0usize;
    let mut min_samples = usize::MAX;
    let mut max_samples = 0usize;
    for samples in by_question.values() {
        let n = samples.len();
        min_samples = min_samples.min(n);
        max_samples = max_samples.max(n);
        sample_total += n;
        acc_sum += samples.iter().filter(|r| r.correct).count() as f64 / n as f64;
        token_sum += samples.iter().map(|r| r.token_count as f64).sum::<f64>();
    }
    if min_samples != max_samples {
        log::warn!(
            "dataset {dataset}: uneven samples per question ({min_samples}..{max_samples}); \
             using per-question means"
        );
    }
    BenchmarkSummary {
        dataset: dataset.to_string(),
        mean_accuracy: acc_sum / by_question.len() as f64,
        mean_tokens: token_sum / sample_total as f64,
        n_questions: by_question.len(),
        samples_per_question: max_samples,
    }
}

type Grouped<'a> = Vec<(&'a str, BTreeMap<&'a str, Vec<&'a EvalRecord>>)>;

fn group_records(records: &[EvalRecord]) -> Grouped<'_> {
    let mut grouped: BTreeMap<&str, BTreeMap<&str, Vec<&EvalRecord>>> = BTreeMap::new();
    for r in records {
        grouped
            .entry(&r.dataset)
            .or_default()
            .entry(&r.question_id)
            .or_default()
            .push(r);
    }
    grouped.into_iter().collect()
}

/// Sequential aggregation core; always available, used by the benches as
/// the baseline the parallel path is compared against.
pub fn summarize_serial(records: &[EvalRecord]) -> Vec<BenchmarkSummary> {
    group_records(records)
        .iter()
        .map(|(dataset, by_question)| summarize_dataset(dataset, by_question))
        .collect()
}

/// Per-dataset summaries, sorted by dataset name.
#[cfg(feature = "parallel")]
pub fn summarize(records: &[EvalRecord]) -> Vec<BenchmarkSummary> {
    group_records(records)
        .par_iter()
        .map(|(dataset, by_question)| summarize_dataset(dataset, by_question))
        .collect()
}

/// Per-dataset summaries, sorted by dataset name.
#[cfg(not(feature = "parallel"))]
pub fn summarize(records: &[EvalRecord]) -> Vec<BenchmarkSummary> {
    summarize_serial(records)
}

// ---------------------------------------------------------------------------
// Keyword profile
// ---------------------------------------------------------------------------

/// Marker-phrase categories for redundant-deliberation analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeywordCategory {
    Exploratory,
    Reflective,
    Checking,
}

impl std::fmt::Display for KeywordCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KeywordCategory::Exploratory => write!(f, "exploratory"),
            KeywordCategory::Reflective => write!(f, "reflective"),
            KeywordCategory::Checking => write!(f, "checking"),
        }
    }
}

pub const EXPLORATORY_KEYWORDS: &[&str] = &["wait"];
pub const REFLECTIVE_KEYWORDS: &[&str] = &["but"];
pub const CHECKING_KEYWORDS: &[&str] = &["make sure", "confirm", "verify", "check"];

pub fn keywords_for(category: KeywordCategory) -> &'static [&'static str] {
    match category {
        KeywordCategory::Exploratory => EXPLORATORY_KEYWORDS,
        KeywordCategory::Reflective => REFLECTIVE_KEYWORDS,
        KeywordCategory::Checking => CHECKING_KEYWORDS,
    }
}

pub const ALL_CATEGORIES: &[KeywordCategory] = &[
    KeywordCategory::Exploratory,
    KeywordCategory::Reflective,
    KeywordCategory::Checking,
];

/// Flat scan table: category, display keyword, phrase as a word sequence.
const KEYWORD_TABLE: &[(KeywordCategory, &str, &[&str])] = &[
    (KeywordCategory::Exploratory, "wait", &["wait"]),
    (KeywordCategory::Reflective, "but", &["but"]),
    (KeywordCategory::Checking, "make sure", &["make", "sure"]),
    (KeywordCategory::Checking, "confirm", &["confirm"]),
    (KeywordCategory::Checking, "verify", &["verify"]),
    (KeywordCategory::Checking, "check", &["check"]),
];

const KEYWORD_SLOTS: usize = 6;

type KeywordCounts = [u64; KEYWORD_SLOTS];

fn add_counts(mut a: KeywordCounts, b: KeywordCounts) -> KeywordCounts {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

/// Per-keyword and per-category counts. A category's count is by
/// construction the sum of its keyword counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KeywordProfile {
    counts: BTreeMap<KeywordCategory, BTreeMap<String, u64>>,
}

impl Default for KeywordProfile {
    fn default() -> Self {
        let mut counts = BTreeMap::new();
        for &cat in ALL_CATEGORIES {
            let per: BTreeMap<String, u64> = keywords_for(cat)
                .iter()
                .map(|k| (k.to_string(), 0))
                .collect();
            counts.insert(cat, per);
        }
        Self { counts }
    }
}

impl KeywordProfile {
    fn from_counts(counts: KeywordCounts) -> Self {
        let mut profile = KeywordProfile::default();
        for ((cat, kw, _), n) in KEYWORD_TABLE.iter().zip(counts) {
            *profile
                .counts
                .get_mut(cat)
                .unwrap()
                .get_mut(*kw)
                .unwrap() += n;
        }
        profile
    }

    pub fn keyword_count(&self, category: KeywordCategory, keyword: &str) -> u64 {
        self.counts[&category].get(keyword).copied().unwrap_or(0)
    }

    pub fn category_count(&self, category: KeywordCategory) -> u64 {
        self.counts[&category].values().sum()
    }

    pub fn per_keyword(&self, category: KeywordCategory) -> &BTreeMap<String, u64> {
        &self.counts[&category]
    }

    pub fn total(&self) -> u64 {
        ALL_CATEGORIES.iter().map(|&c| self.category_count(c)).sum()
    }
}

/// Count every table keyword in one text. A word is a maximal run of
/// alphanumeric characters, so "rebuttal" never matches "but" and
/// "checkpoint" never matches "check"; comparison folds ASCII case, and a
/// multi-word phrase matches as a contiguous word sequence.
fn scan_text(text: &str) -> KeywordCounts {
    let words: Vec<&str> = text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .collect();
    let mut counts = [0u64; KEYWORD_SLOTS];
    for (slot, (_, _, phrase)) in KEYWORD_TABLE.iter().enumerate() {
        if words.len() < phrase.len() {
            continue;
        }
        for start in 0..=words.len() - phrase.len() {
            if phrase
                .iter()
                .zip(&words[start..])
                .all(|(p, w)| w.eq_ignore_ascii_case(p))
            {
                counts[slot] += 1;
            }
        }
    }
    counts
}

/// Sequential keyword scan; always available, bench baseline.
pub fn keyword_frequency_serial<S: AsRef<str>>(texts: &[S]) -> KeywordProfile {
    KeywordProfile::from_counts(
        texts
            .iter()
            .map(|t| scan_text(t.as_ref()))
            .fold([0u64; KEYWORD_SLOTS], add_counts),
    )
}

/// Case-insensitive, word-boundary keyword counts over a corpus.
#[cfg(feature = "parallel")]
pub fn keyword_frequency<S: AsRef<str> + Sync>(texts: &[S]) -> KeywordProfile {
    KeywordProfile::from_counts(
        texts
            .par_iter()
            .map(|t| scan_text(t.as_ref()))
            .reduce(|| [0u64; KEYWORD_SLOTS], add_counts),
    )
}

/// Case-insensitive, word-boundary keyword counts over a corpus.
#[cfg(not(feature = "parallel"))]
pub fn keyword_frequency<S: AsRef<str> + Sync>(texts: &[S]) -> KeywordProfile {
    keyword_frequency_serial(texts)
}

// ---------------------------------------------------------------------------
// Compression report (two result sets side by side)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct DatasetCompression {
    pub dataset: String,
    pub original_tokens: f64,
    pub current_tokens: f64,
    pub compression_rate: f64,
    pub normalized_accuracy: f64,
    pub normalized_token: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompressionReport {
    pub per_dataset: Vec<DatasetCompression>,
    pub average_compression_rate: f64,
}

/// Join two per-dataset summaries (original model vs current model) into a
/// compression report over the datasets they share.
pub fn compression_report(
    original: &[BenchmarkSummary],
    current: &[BenchmarkSummary],
) -> Result<CompressionReport> {
    let orig_by_name: BTreeMap<&str, &BenchmarkSummary> =
        original.iter().map(|s| (s.dataset.as_str(), s)).collect();
    let mut per_dataset = Vec::new();
    for cur in current {
        let Some(orig) = orig_by_name.get(cur.dataset.as_str()) else {
            log::warn!("dataset {} absent from the original results; skipped", cur.dataset);
            continue;
        };
        per_dataset.push(DatasetCompression {
            dataset: cur.dataset.clone(),
            original_tokens: orig.mean_tokens,
            current_tokens: cur.mean_tokens,
            compression_rate: compression_rate(orig.mean_tokens, cur.mean_tokens)?,
            normalized_accuracy: normalized_accuracy(cur.mean_accuracy, orig.mean_accuracy)?,
            normalized_token: normalized_token(cur.mean_tokens, orig.mean_tokens)?,
        });
    }
    if per_dataset.is_empty() {
        return Err(Error::InvalidArgument(
            "the two result sets share no dataset".into(),
        ));
    }
    let pairs: Vec<(f64, f64)> = per_dataset
        .iter()
        .map(|d| (d.original_tokens, d.current_tokens))
        .collect();
    Ok(CompressionReport {
        per_dataset,
        average_compression_rate: avg_compression_rate(&pairs)?,
    })
}

// ---------------------------------------------------------------------------
// Plain-text rendering
// ---------------------------------------------------------------------------

/// Percent with one decimal place, Table-style.
pub fn percent(x: f64) -> String {
    format!("{:.1}%", x * 100.0)
}

pub fn render_summary_table(summaries: &[BenchmarkSummary]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<16} {:>9} {:>12} {:>10} {:>9}\n",
        "dataset", "accuracy", "mean tokens", "questions", "samples"
    ));
    for s in summaries {
        out.push_str(&format!(
            "{:<16} {:>9} {:>12.1} {:>10} {:>9}\n",
            s.dataset,
            percent(s.mean_accuracy),
            s.mean_tokens,
            s.n_questions,
            s.samples_per_question
        ));
    }
    out
}

pub fn render_compression_table(report: &CompressionReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<16} {:>11} {:>10} {:>7} {:>10} {:>10}\n",
        "dataset", "orig tokens", "cur tokens", "C.R.", "norm acc", "norm tok"
    ));
    for d in &report.per_dataset {
        out.push_str(&format!(
            "{:<16} {:>11.1} {:>10.1} {:>7} {:>10.3} {:>10.3}\n",
            d.dataset,
            d.original_tokens,
            d.current_tokens,
            percent(d.compression_rate),
            d.normalized_accuracy,
            d.normalized_token
        ));
    }
    out.push_str(&format!(
        "average compression rate: {}\n",
        percent(report.average_compression_rate)
    ));
    out
}

pub fn render_keyword_table(profile: &KeywordProfile) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<14} {:<12} {:>8}\n", "category", "keyword", "count"));
    for &cat in ALL_CATEGORIES {
        for (kw, n) in profile.per_keyword(cat) {
            out.push_str(&format!("{:<14} {:<12} {:>8}\n", cat.to_string(), kw, n));
        }
        out.push_str(&format!(
            "{:<14} {:<12} {:>8}\n",
            cat.to_string(),
            "(total)",
            profile.category_count(cat)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_count_modes() {
        assert_eq!(token_count("", Tokenizer::Whitespace, None).unwrap(), 0);
        assert_eq!(token_count("a b  c", Tokenizer::Whitespace, None).unwrap(), 3);
        assert_eq!(token_count("ab", Tokenizer::Bytes, None).unwrap(), 2);
        assert_eq!(token_count("anything", Tokenizer::External, Some(99)).unwrap(), 99);
        assert!(matches!(
            token_count("anything", Tokenizer::External, None),
            Err(Error::MissingTokenCount { .. })
        ));
    }

    #[test]
    fn compression_rate_examples() {
        let r = compression_rate(554.0, 253.0).unwrap();
        assert!((r - 0.5433).abs() <= 1e-4, "{r}");
        assert_eq!(compression_rate(100.0, 100.0).unwrap(), 0.0);
        assert_eq!(compression_rate(100.0, 150.0).unwrap(), 0.0);
        assert!(matches!(
            compression_rate(0.0, 10.0),
            Err(Error::ZeroOriginalTokens(_))
        ));
    }

    /// Generation lengths of the 7B original and compressed models over the
    /// six benchmarks, in benchmark order.
    pub(crate) const LENGTH_PAIRS_7B: [(f64, f64); 6] = [
        (769.0, 147.0),
        (554.0, 253.0),
        (2861.0, 1556.0),
        (6820.0, 6368.0),
        (4510.0, 3386.0),
        (3347.0, 1451.0),
    ];

    pub(crate) const LENGTH_PAIRS_14B: [(f64, f64); 6] = [
        (476.0, 158.0),
        (679.0, 240.0),
        (2951.0, 2092.0),
        (6701.0, 6403.0),
        (4584.0, 3839.0),
        (3270.0, 2177.0),
    ];

    #[test]
    fn average_compression_matches_published_rates() {
        let acr = avg_compression_rate(&LENGTH_PAIRS_7B).unwrap();
        assert!((acr - 0.449).abs() <= 0.005, "7B A.C.R. {acr}");
        let acr = avg_compression_rate(&LENGTH_PAIRS_14B).unwrap();
        assert!((acr - 0.358).abs() <= 0.005, "14B A.C.R. {acr}");
        // All-equal pairs compress by zero.
        assert_eq!(
            avg_compression_rate(&[(100.0, 100.0), (7.0, 7.0)]).unwrap(),
            0.0
        );
        assert!(avg_compression_rate(&[]).is_err());
    }

    #[test]
    fn avg_compression_is_permutation_invariant() {
        let mut reversed = LENGTH_PAIRS_7B;
        reversed.reverse();
        assert_eq!(
            avg_compression_rate(&LENGTH_PAIRS_7B).unwrap(),
            avg_compression_rate(&reversed).unwrap()
        );
    }

    #[test]
    fn normalized_metrics() {
        let r = normalized_accuracy(87.7, 89.4).unwrap();
        assert!((r - 0.981).abs() <= 1e-3, "{r}");
        assert_eq!(normalized_accuracy(5.0, 5.0).unwrap(), 1.0);
        assert_eq!(normalized_accuracy(0.0, 3.0).unwrap(), 0.0);
        assert!(normalized_accuracy(1.0, 0.0).is_err());

        let r = normalized_token(253.0, 554.0).unwrap();
        assert!((r - 0.4567).abs() <= 1e-4, "{r}");
        assert_eq!(normalized_token(10.0, 10.0).unwrap(), 1.0);
        assert_eq!(normalized_token(0.0, 3.0).unwrap(), 0.0);
        assert!(normalized_token(1.0, 0.0).is_err());
    }

    pub(crate) fn record(
        dataset: &str,
        qid: &str,
        sample: u32,
        correct: bool,
        tokens: u64,
        text: &str,
    ) -> EvalRecord {
        EvalRecord {
            question_id: qid.to_string(),
            sample_index: sample,
            output_text: text.to_string(),
            token_count: tokens,
            correct,
            dataset: dataset.to_string(),
        }
    }

    #[test]
    fn summarize_simple_cases() {
        // One question, samples T T F F -> 0.5.
        let records: Vec<EvalRecord> = [true, true, false, false]
            .iter()
            .enumerate()
            .map(|(i, &c)| record("d", "q1", i as u32, c, 10, ""))
            .collect();
        let s = summarize(&records);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].mean_accuracy, 0.5);
        assert_eq!(s[0].n_questions, 1);
        assert_eq!(s[0].samples_per_question, 4);

        // Two questions at accuracies 1.0 and 0.0 -> 0.5.
        let records = vec![
            record("d", "q1", 0, true, 10, ""),
            record("d", "q2", 0, false, 30, ""),
        ];
        let s = summarize(&records);
        assert_eq!(s[0].mean_accuracy, 0.5);
        assert_eq!(s[0].mean_tokens, 20.0);
    }

    #[test]
    fn summarize_matches_nested_mean_oracle() {
        // 3 questions x 8 samples, mixed correctness and token counts.
        let mut records = Vec::new();
        for (qi, qid) in ["qa", "qb", "qc"].iter().enumerate() {
            for s in 0..8u32 {
                let correct = (qi as u32 + s).is_multiple_of(qi as u32 + 2);
                let tokens = 100 + 13 * (qi as u64) + 7 * s as u64;
                records.push(record("math", qid, s, correct, tokens, ""));
            }
        }

        // Independent brute-force nested-loop oracle.
        let mut acc_by_question = Vec::new();
        let mut all_tokens = Vec::new();
        for qid in ["qa", "qb", "qc"] {
            let samples: Vec<&EvalRecord> =
                records.iter().filter(|r| r.question_id == qid).collect();
            let mut hits = 0.0;
            for r in &samples {
                if r.correct {
                    hits += 1.0;
                }
                all_tokens.push(r.token_count as f64);
            }
            acc_by_question.push(hits / samples.len() as f64);
        }
        let oracle_acc = acc_by_question.iter().sum::<f64>() / acc_by_question.len() as f64;
        let oracle_tokens = all_tokens.iter().sum::<f64>() / all_tokens.len() as f64;

        let s = summarize(&records);
        assert_eq!(s.len(), 1);
        assert!((s[0].mean_accuracy - oracle_acc).abs() <= 1e-12);
        assert!((s[0].mean_tokens - oracle_tokens).abs() <= 1e-12);
        assert_eq!(s[0].n_questions, 3);
        assert_eq!(s[0].samples_per_question, 8);
    }

    #[test]
    fn summarize_is_order_invariant_and_matches_serial() {
        let mut records = Vec::new();
        for d in ["b-set", "a-set"] {
            for q in 0..5 {
                for s in 0..4u32 {
                    records.push(record(
                        d,
                        &format!("q{q}"),
                        s,
                        (q + s as usize).is_multiple_of(3),
                        50 + q as u64 + s as u64,
                        "",
                    ));
                }
            }
        }
        let forward = summarize(&records);
        let mut shuffled = records.clone();
        shuffled.reverse();
        shuffled.swap(3, 17);
        let backward = summarize(&shuffled);
        assert_eq!(forward, backward);
        assert_eq!(forward, summarize_serial(&records));
        // Sorted by dataset name.
        assert_eq!(forward[0].dataset, "a-set");
        assert_eq!(forward[1].dataset, "b-set");
    }

    #[test]
    fn keyword_fixtures() {
        let empty: [&str; 1] = [""];
        let p = keyword_frequency(&empty);
        assert_eq!(p.total(), 0);

        let p = keyword_frequency(&["Wait, but wait — check and verify."]);
        assert_eq!(p.category_count(KeywordCategory::Exploratory), 2);
        assert_eq!(p.category_count(KeywordCategory::Reflective), 1);
        assert_eq!(p.category_count(KeywordCategory::Checking), 2);
        assert_eq!(p.keyword_count(KeywordCategory::Checking, "check"), 1);
        assert_eq!(p.keyword_count(KeywordCategory::Checking, "verify"), 1);

        // Word boundaries: substrings do not count.
        let p = keyword_frequency(&["rebuttal checkpoint"]);
        assert_eq!(p.total(), 0);

        // Multi-word phrase.
        let p = keyword_frequency(&["Make sure to make  sure."]);
        assert_eq!(p.keyword_count(KeywordCategory::Checking, "make sure"), 2);
    }

    #[test]
    fn category_count_equals_sum_of_keywords() {
        let p = keyword_frequency(&[
            "wait and check",
            "verify, confirm, make sure, but wait",
            "nothing here",
        ]);
        for &cat in ALL_CATEGORIES {
            let sum: u64 = p.per_keyword(cat).values().sum();
            assert_eq!(p.category_count(cat), sum);
        }
        assert_eq!(p, keyword_frequency_serial(&[
            "wait and check",
            "verify, confirm, make sure, but wait",
            "nothing here",
        ]));
    }

    /// Brute-force oracle: its own lowercasing word split, then for every
    /// start position and every keyword compare word-by-word.
    pub(crate) fn keyword_oracle(texts: &[String]) -> KeywordProfile {
        let mut profile = KeywordProfile::default();
        for text in texts {
            let words: Vec<String> = text
                .split(|c: char| !c.is_alphanumeric())
                .filter(|w| !w.is_empty())
                .map(|w| w.to_lowercase())
                .collect();
            for &cat in ALL_CATEGORIES {
                for &kw in keywords_for(cat) {
                    let phrase: Vec<&str> = kw.split_whitespace().collect();
                    let mut n = 0u64;
                    for start in 0..words.len() {
                        if start + phrase.len() > words.len() {
                            break;
                        }
                        let mut all = true;
                        for (j, p) in phrase.iter().enumerate() {
                            if words[start + j] != *p {
                                all = false;
                                break;
                            }
                        }
                        if all {
                            n += 1;
                        }
                    }
                    if n > 0 {
                        *profile
                            .counts
                            .get_mut(&cat)
                            .unwrap()
                            .get_mut(kw)
                            .unwrap() += n;
                    }
                }
            }
        }
        profile
    }

    pub(crate) fn random_ascii_text(seed: u64, idx: u64) -> String {
        // Random words drawn from a vocabulary that includes the keywords,
        // near-miss substrings, and filler.
        const VOCAB: &[&str] = &[
            "wait", "but", "check", "verify", "confirm", "make", "sure", "rebuttal",
            "checkpoint", "waiting", "verifying", "the", "answer", "is", "so", "x",
            "Wait,", "BUT", "Check.", "makesure", "sure,",
        ];
        let len = 1 + (crate::rng::hash_parts(&[seed, idx, 0]) % 40) as usize;
        let mut words = Vec::with_capacity(len);
        for j in 0..len {
            let h = crate::rng::hash_parts(&[seed, idx, 1 + j as u64]);
            words.push(VOCAB[crate::rng::bounded(h, VOCAB.len())]);
        }
        words.join(" ")
    }

    #[test]
    fn keyword_scan_matches_brute_force_on_random_texts() {
        let texts: Vec<String> = (0..200).map(|i| random_ascii_text(7, i)).collect();
        assert_eq!(keyword_frequency(&texts), keyword_oracle(&texts));
    }

    #[test]
    fn compression_report_joins_by_dataset() {
        let original = vec![
            BenchmarkSummary {
                dataset: "gsm8k".into(),
                mean_accuracy: 0.894,
                mean_tokens: 554.0,
                n_questions: 10,
                samples_per_question: 4,
            },
            BenchmarkSummary {
                dataset: "math500".into(),
                mean_accuracy: 0.868,
                mean_tokens: 2861.0,
                n_questions: 10,
                samples_per_question: 4,
            },
        ];
        let current = vec![
            BenchmarkSummary {
                dataset: "gsm8k".into(),
                mean_accuracy: 0.877,
                mean_tokens: 253.0,
                n_questions: 10,
                samples_per_question: 4,
            },
            BenchmarkSummary {
                dataset: "math500".into(),
                mean_accuracy: 0.874,
                mean_tokens: 1556.0,
                n_questions: 10,
                samples_per_question: 4,
            },
        ];
        let report = compression_report(&original, &current).unwrap();
        assert_eq!(report.per_dataset.len(), 2);
        let expected = avg_compression_rate(&[(554.0, 253.0), (2861.0, 1556.0)]).unwrap();
        assert_eq!(report.average_compression_rate, expected);
        let gsm = &report.per_dataset[0];
        assert!((gsm.normalized_accuracy - 0.981).abs() <= 1e-3);
        assert!((gsm.normalized_token - 0.4567).abs() <= 1e-4);
    }

    #[test]
    fn rendering_uses_one_decimal_percentages() {
        assert_eq!(percent(0.449), "44.9%");
        assert_eq!(percent(0.0), "0.0%");
        let report = compression_report(
            &summarize(&[record("d", "q", 0, true, 100, "")]),
            &summarize(&[record("d", "q", 0, true, 50, "")]),
        )
        .unwrap();
        let table = render_compression_table(&report);
        assert!(table.contains("50.0%"), "{table}");
    }
}
