//! Keep/drop decisions over scored documents.
//!
//! * top-k by quality factor (the default policy),
//! * temperature sampling without replacement via Gumbel-perturbed keys,
//! * perplexity gating between two nearest-rank percentiles,
//! * Pareto noisy thresholding of external classifier scores.
//!
//! Kept ids are always reported in input order.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{corpus_shards, read_corpus, write_corpus, CorpusError, CorpusManifest, ReadError};
use crate::rng;
use crate::scorer::QualityScore;
use crate::stats::nearest_rank;
use crate::tsv::{escape, unescape};

pub const DEFAULT_KEEP_RATE: f64 = 0.7;
pub const DEFAULT_LO_PCT: f64 = 15.0;
pub const DEFAULT_HI_PCT: f64 = 85.0;
pub const DEFAULT_PARETO_ALPHA: f64 = 9.0;

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("empty-selection-input")]
    EmptyInput,
    #[error("invalid-classifier-score: {doc_id} has score {score}")]
    InvalidClassifierScore { doc_id: String, score: f64 },
    #[error("invalid-policy: {0}")]
    InvalidPolicy(String),
    #[error("id-not-in-corpus: {0}")]
    IdNotInCorpus(String),
    #[error("invalid score value for {0}")]
    InvalidScore(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl SelectionError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::EmptyInput => "empty-selection-input",
            Self::InvalidClassifierScore { .. } => "invalid-classifier-score",
            Self::InvalidPolicy(_) => "invalid-policy",
            Self::IdNotInCorpus(_) => "id-not-in-corpus",
            Self::InvalidScore(_) => "invalid-score",
            Self::Corpus(_) | Self::Io { .. } => "io",
        }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Self::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    Topk,
    Temperature { tau: f64 },
    PercentileGate { lo_pct: f64, hi_pct: f64 },
    ParetoThreshold { pareto_alpha: f64 },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Topk => "topk",
            Self::Temperature { .. } => "temperature",
            Self::PercentileGate { .. } => "percentile_gate",
            Self::ParetoThreshold { .. } => "pareto_threshold",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionPolicy {
    #[serde(flatten)]
    pub method: Method,
    pub keep_rate: f64,
    pub seed: u64,
}

impl SelectionPolicy {
    pub fn topk(keep_rate: f64) -> Self {
        Self {
            method: Method::Topk,
            keep_rate,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), SelectionError> {
        let bad = |m: String| Err(SelectionError::InvalidPolicy(m));
        if !(self.keep_rate > 0.0 && self.keep_rate <= 1.0) {
            return bad(format!("keep_rate {} not in (0, 1]", self.keep_rate));
        }
        match self.method {
            Method::Topk => Ok(()),
            Method::Temperature { tau } if !(tau > 0.0 && tau.is_finite()) => bad(format!("tau {tau} must be > 0")),
            Method::PercentileGate { lo_pct, hi_pct }
                if !(0.0 <= lo_pct && lo_pct < hi_pct && hi_pct <= 100.0) =>
            {
                bad(format!("need 0 <= lo ({lo_pct}) < hi ({hi_pct}) <= 100"))
            }
            Method::ParetoThreshold { pareto_alpha } if !(pareto_alpha > 0.0) => {
                bad(format!("pareto alpha {pareto_alpha} must be > 0"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Audit {
    pub input: usize,
    pub kept: usize,
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub kept_ids: Vec<String>,
    pub policy: SelectionPolicy,
    pub threshold_used: Option<f64>,
    pub audit: Audit,
}

impl SelectionResult {
    fn from_mask(ids: &[&str], keep: &[bool], policy: SelectionPolicy, threshold_used: Option<f64>) -> Self {
        let kept_ids: Vec<String> = ids
            .iter()
            .zip(keep)
            .filter(|(_, &k)| k)
            .map(|(id, _)| id.to_string())
            .collect();
        let audit = Audit {
            input: ids.len(),
            kept: kept_ids.len(),
            dropped: ids.len() - kept_ids.len(),
        };
        Self {
            kept_ids,
            policy,
            threshold_used,
            audit,
        }
    }

    /// The JSON audit record written next to `kept_ids.txt`.
    pub fn audit_json(&self) -> serde_json::Value {
        let params = match self.policy.method {
            Method::Topk => serde_json::json!({ "keep_rate": self.policy.keep_rate }),
            Method::Temperature { tau } => serde_json::json!({ "keep_rate": self.policy.keep_rate, "tau": tau }),
            Method::PercentileGate { lo_pct, hi_pct } => serde_json::json!({ "lo_pct": lo_pct, "hi_pct": hi_pct }),
            Method::ParetoThreshold { pareto_alpha } => serde_json::json!({ "pareto_alpha": pareto_alpha }),
        };
        serde_json::json!({
            "input": self.audit.input,
            "kept": self.audit.kept,
            "dropped": self.audit.dropped,
            "method": self.policy.method.name(),
            "params": params,
            "seed": self.policy.seed,
            "threshold_used": self.threshold_used,
        })
    }
}

/// `ceil(keep_rate * n)`, robust to representation error in `keep_rate`.
pub fn keep_count(keep_rate: f64, n: usize) -> usize {
    (((keep_rate * n as f64) - 1e-9).ceil().max(0.0) as usize).min(n)
}

fn check_values(items: &[(&str, f64)]) -> Result<(), SelectionError> {
    if items.is_empty() {
        return Err(SelectionError::EmptyInput);
    }
    if let Some((id, _)) = items.iter().find(|(_, v)| !v.is_finite()) {
        return Err(SelectionError::InvalidScore(id.to_string()));
    }
    Ok(())
}

/// Indices of the `k` largest keys; ties broken by id ascending.
fn top_indices(items: &[(&str, f64)], keys: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..items.len()).collect();
    let cmp = |&a: &usize, &b: &usize| {
        keys[b]
            .total_cmp(&keys[a])
            .then_with(|| items[a].0.cmp(items[b].0))
    };
    if k < order.len() && k > 0 {
        order.select_nth_unstable_by(k - 1, cmp);
    }
    order.truncate(k);
    order
}

fn mask_of(n: usize, indices: &[usize]) -> Vec<bool> {
    let mut keep = vec![false; n];
    for &i in indices {
        keep[i] = true;
    }
    keep
}

fn as_items(scores: &[QualityScore]) -> Vec<(&str, f64)> {
    scores.iter().map(|s| (s.doc_id.as_str(), s.d)).collect()
}

/// Keeps the `ceil(keep_rate * n)` documents with the largest `d`.
pub fn select_topk(scores: &[QualityScore], keep_rate: f64) -> Result<SelectionResult, SelectionError> {
    topk_items(&as_items(scores), keep_rate)
}

pub fn topk_items(items: &[(&str, f64)], keep_rate: f64) -> Result<SelectionResult, SelectionError> {
    let policy = SelectionPolicy::topk(keep_rate);
    policy.validate()?;
    check_values(items)?;
    let k = keep_count(keep_rate, items.len());
    let keys: Vec<f64> = items.iter().map(|i| i.1).collect();
    let top = top_indices(items, &keys, k);
    let threshold = top.iter().map(|&i| keys[i]).min_by(f64::total_cmp);
    let ids: Vec<&str> = items.iter().map(|i| i.0).collect();
    Ok(SelectionResult::from_mask(&ids, &mask_of(items.len(), &top), policy, threshold))
}

/// Samples `ceil(keep_rate * n)` documents without replacement with
/// probability proportional to `exp(d / tau)`: each document gets the key
/// `d / tau + g` with `g` standard Gumbel, and the top keys are kept.
/// `tau -> 0` recovers top-k, `tau -> inf` uniform sampling.
pub fn select_temperature(
    scores: &[QualityScore],
    keep_rate: f64,
    tau: f64,
    seed: u64,
) -> Result<SelectionResult, SelectionError> {
    temperature_items(&as_items(scores), keep_rate, tau, seed)
}

pub fn temperature_items(
    items: &[(&str, f64)],
    keep_rate: f64,
    tau: f64,
    seed: u64,
) -> Result<SelectionResult, SelectionError> {
    let policy = SelectionPolicy {
        method: Method::Temperature { tau },
        keep_rate,
        seed,
    };
    policy.validate()?;
    check_values(items)?;
    let mut r = rng::stream(seed);
    let keys: Vec<f64> = items.iter().map(|(_, d)| d / tau + rng::gumbel(&mut r)).collect();
    let k = keep_count(keep_rate, items.len());
    let top = top_indices(items, &keys, k);
    let threshold = top.iter().map(|&i| items[i].1).min_by(f64::total_cmp);
    let ids: Vec<&str> = items.iter().map(|i| i.0).collect();
    Ok(SelectionResult::from_mask(&ids, &mask_of(items.len(), &top), policy, threshold))
}

/// Keeps documents whose perplexity lies in `[P_lo, P_hi]`, where the bounds
/// are order statistics of the sorted perplexities: `P_hi` at nearest rank
/// `ceil(hi * n / 100)` and `P_lo` at the rank just above `ceil(lo * n / 100)`.
/// With distinct values this keeps exactly the ranks strictly above the lo-th
/// percentile position up to the hi-th, i.e. the middle `(hi - lo)%`; tied
/// values on a bound are all kept.
pub fn percentile_gate(
    perplexities: &[(&str, f64)],
    lo_pct: f64,
    hi_pct: f64,
) -> Result<SelectionResult, SelectionError> {
    let policy = SelectionPolicy {
        method: Method::PercentileGate { lo_pct, hi_pct },
        keep_rate: (hi_pct - lo_pct) / 100.0,
        seed: 0,
    };
    policy.validate()?;
    check_values(perplexities)?;
    let n = perplexities.len();
    let mut sorted: Vec<f64> = perplexities.iter().map(|p| p.1).collect();
    sorted.sort_by(f64::total_cmp);
    let hi_rank = nearest_rank(hi_pct, n);
    let lo_rank = if lo_pct == 0.0 { 0 } else { nearest_rank(lo_pct, n) };
    let lower_rank = (lo_rank + 1).min(hi_rank);
    let p_lo = sorted[lower_rank - 1];
    let p_hi = sorted[hi_rank - 1];
    let keep: Vec<bool> = perplexities.iter().map(|(_, p)| *p >= p_lo && *p <= p_hi).collect();
    let ids: Vec<&str> = perplexities.iter().map(|i| i.0).collect();
    Ok(SelectionResult::from_mask(&ids, &keep, policy, Some(p_lo)))
}

/// Perplexity gate on the larger meta-model's perplexities.
pub fn gate_scores(scores: &[QualityScore], lo_pct: f64, hi_pct: f64) -> Result<SelectionResult, SelectionError> {
    let items: Vec<(&str, f64)> = scores.iter().map(|s| (s.doc_id.as_str(), s.ppl_large)).collect();
    percentile_gate(&items, lo_pct, hi_pct)
}

/// Shifted Pareto draw with unit scale: `u^(-1/alpha) - 1`, `u` in (0, 1].
pub fn pareto_draw<R: rand::Rng>(r: &mut R, alpha: f64) -> f64 {
    rng::unit_open_closed(r).powf(-1.0 / alpha) - 1.0
}

/// Keeps document `i` iff `s_i > 1 - x_i` with `x_i` an independent shifted
/// Pareto(alpha) draw. Classifier scores must lie in `[0, 1]`.
pub fn pareto_noisy_threshold(
    classifier_scores: &[(&str, f64)],
    alpha: f64,
    seed: u64,
) -> Result<SelectionResult, SelectionError> {
    let policy = SelectionPolicy {
        method: Method::ParetoThreshold { pareto_alpha: alpha },
        keep_rate: 1.0,
        seed,
    };
    policy.validate()?;
    if classifier_scores.is_empty() {
        return Err(SelectionError::EmptyInput);
    }
    if let Some((id, s)) = classifier_scores.iter().find(|(_, s)| !(0.0..=1.0).contains(s)) {
        return Err(SelectionError::InvalidClassifierScore {
            doc_id: id.to_string(),
            score: *s,
        });
    }
    let mut r = rng::stream(seed);
    let keep: Vec<bool> = classifier_scores
        .iter()
        .map(|(_, s)| *s > 1.0 - pareto_draw(&mut r, alpha))
        .collect();
    let ids: Vec<&str> = classifier_scores.iter().map(|i| i.0).collect();
    Ok(SelectionResult::from_mask(&ids, &keep, policy, None))
}

/// Materializes the kept documents of a corpus, in original order, as a new
/// corpus under `out_dir`. Every kept id must exist in the corpus.
pub fn apply_selection(
    result: &SelectionResult,
    corpus_dir: &Path,
    out_dir: &Path,
    shard_size: usize,
    corpus_id: &str,
) -> Result<CorpusManifest, SelectionError> {
    let shards = corpus_shards(corpus_dir)?;
    let kept: HashSet<&str> = result.kept_ids.iter().map(String::as_str).collect();
    let mut present = HashSet::new();
    for item in read_corpus(&shards) {
        match item {
            Ok(doc) => {
                if kept.contains(doc.id.as_str()) {
                    present.insert(doc.id);
                }
            }
            Err(ReadError::Fatal(e)) => return Err(e.into()),
            Err(ReadError::Record(_)) => {}
        }
    }
    if let Some(missing) = result.kept_ids.iter().find(|id| !present.contains(id.as_str())) {
        return Err(SelectionError::IdNotInCorpus(missing.clone()));
    }
    let mut fatal = None;
    let docs = read_corpus(&shards).filter_map(|item| match item {
        Ok(doc) if kept.contains(doc.id.as_str()) => Some(doc),
        Ok(_) | Err(ReadError::Record(_)) => None,
        Err(ReadError::Fatal(e)) => {
            fatal = Some(e);
            None
        }
    });
    let manifest = write_corpus(docs, out_dir, shard_size, corpus_id)?;
    if let Some(e) = fatal {
        return Err(e.into());
    }
    Ok(manifest)
}

/// Reads a `doc_id<TAB>score` file (header line optional).
pub fn read_classifier_scores(path: &Path) -> Result<Vec<(String, f64)>, SelectionError> {
    let file = File::open(path).map_err(|e| SelectionError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| SelectionError::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let (id, score) = line
            .split_once('\t')
            .ok_or_else(|| SelectionError::io(path, format!("line {}: expected two fields", i + 1)))?;
        match score.trim().parse::<f64>() {
            Ok(s) => out.push((unescape(id), s)),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(SelectionError::io(path, format!("line {}: {e}", i + 1))),
        }
    }
    Ok(out)
}

pub fn write_kept_ids(path: &Path, result: &SelectionResult) -> Result<(), SelectionError> {
    let mut body = String::new();
    for id in &result.kept_ids {
        body.push_str(&escape(id));
        body.push('\n');
    }
    fs::write(path, body).map_err(|e| SelectionError::io(path, e))
}

pub fn write_audit(path: &Path, result: &SelectionResult) -> Result<(), SelectionError> {
    let json = serde_json::to_string_pretty(&result.audit_json()).expect("audit serializes");
    fs::write(path, json + "\n").map_err(|e| SelectionError::io(path, e))
}
