//! Per-document quality factors.
//!
//! The quality factor of a document is `d = PPL_small / PPL_large`, the
//! ratio of the small meta-model's perplexity to the large one's. With
//! `PPL = 2^L` this is `2^(L_small - L_large)`: a document whose loss drops a
//! lot with extra capacity gets a large `d`.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{with_pool, Document};
use crate::lm::MetaModelPair;
use crate::stats::{mean, Quantiles};
use crate::tsv::{escape, fmt_f64, unescape};

pub const SCORE_HEADER: &str = "doc_id\tn_tokens\tppl_small\tppl_large\tquality_factor";
const CACHE_HEADER: &str = "doc_id\tcontent_hash\tsmall_fp\tlarge_fp\tn_tokens\tppl_small\tppl_large";
pub const DEFAULT_ERROR_BUDGET: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoreError {
    #[error("invalid-perplexity: {0}")]
    InvalidPerplexity(String),
    #[error("scorer-unavailable for {doc_id}: {message}")]
    ScorerUnavailable { doc_id: String, message: String },
    #[error("error budget exceeded: {errors} of {total} documents failed (budget {budget})")]
    ErrorBudgetExceeded { errors: usize, total: usize, budget: f64 },
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed score file {path} line {line}: {message}")]
    Malformed { path: String, line: usize, message: String },
}

impl ScoreError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::InvalidPerplexity(_) => "invalid-perplexity",
            Self::ScorerUnavailable { .. } => "scorer-unavailable",
            Self::ErrorBudgetExceeded { .. } => "error-budget-exceeded",
            Self::Io { .. } => "io",
            Self::Malformed { .. } => "malformed-score-file",
        }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Self::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}

/// `ppl_small / ppl_large`; both inputs must be finite and positive.
pub fn quality_factor(ppl_small: f64, ppl_large: f64) -> Result<f64, ScoreError> {
    for p in [ppl_small, ppl_large] {
        if !(p.is_finite() && p > 0.0) {
            return Err(ScoreError::InvalidPerplexity(format!("{p}")));
        }
    }
    Ok(ppl_small / ppl_large)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityScore {
    pub doc_id: String,
    pub n_tokens: usize,
    pub ppl_small: f64,
    pub ppl_large: f64,
    pub d: f64,
}

impl QualityScore {
    pub fn new(doc_id: impl Into<String>, n_tokens: usize, ppl_small: f64, ppl_large: f64) -> Result<Self, ScoreError> {
        let d = quality_factor(ppl_small, ppl_large)?;
        Ok(Self {
            doc_id: doc_id.into(),
            n_tokens,
            ppl_small,
            ppl_large,
            d,
        })
    }

    /// `log2 d = L_small - L_large`.
    pub fn log2_d(&self) -> f64 {
        self.ppl_small.log2() - self.ppl_large.log2()
    }
}

/// Client for two remote perplexity services speaking
/// `POST /v1/perplexity {"texts": [...]}` →
/// `{"perplexities": [...], "model": "...", "log_base": 2}`.
#[derive(Debug, Clone)]
pub struct RemotePair {
    pub small_url: String,
    pub large_url: String,
    pub batch_size: usize,
    pub timeout: Duration,
    pub retries: usize,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct PerplexityRequest<'a> {
    texts: Vec<&'a str>,
}

#[derive(Deserialize)]
struct PerplexityResponse {
    perplexities: Vec<Option<f64>>,
    #[serde(default)]
    model: Option<String>,
    #[serde(default)]
    log_base: Option<f64>,
}

/// Parses a scorer response. Non-standard `NaN`/`Infinity` literals (as
/// emitted by some JSON encoders) are read as missing values, which later
/// fail validation as invalid perplexities.
fn parse_perplexity_response(body: &str) -> Result<PerplexityResponse, String> {
    match serde_json::from_str(body) {
        Ok(r) => Ok(r),
        Err(first) => {
            let patched = body
                .replace("-Infinity", "null")
                .replace("Infinity", "null")
                .replace("NaN", "null");
            serde_json::from_str(&patched).map_err(|_| first.to_string())
        }
    }
}

pub fn perplexity_url(base: &str) -> String {
    let base = base.trim_end_matches('/');
    if base.ends_with("/v1/perplexity") {
        base.to_string()
    } else {
        format!("{base}/v1/perplexity")
    }
}

impl RemotePair {
    pub fn new(small_url: &str, large_url: &str, batch_size: usize, timeout: Duration) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .expect("http client");
        Self {
            small_url: perplexity_url(small_url),
            large_url: perplexity_url(large_url),
            batch_size: batch_size.max(1),
            timeout,
            retries: 3,
            client,
        }
    }

    fn fingerprint(url: &str) -> String {
        format!("remote-{:016x}", xxhash_rust::xxh3::xxh3_64(url.as_bytes()))
    }

    fn post_once(&self, url: &str, texts: &[&str]) -> Result<PerplexityResponse, String> {
        let body = PerplexityRequest { texts: texts.to_vec() };
        let resp = self
            .client
            .post(url)
            .json(&body)
            .send()
            .map_err(|e| e.to_string())?;
        if !resp.status().is_success() {
            return Err(format!("http status {}", resp.status()));
        }
        let body = resp.text().map_err(|e| e.to_string())?;
        let parsed = parse_perplexity_response(&body)?;
        if parsed.perplexities.len() != texts.len() {
            return Err(format!(
                "expected {} perplexities, got {}",
                texts.len(),
                parsed.perplexities.len()
            ));
        }
        match parsed.log_base {
            Some(2.0) => {}
            other => return Err(format!("log_base must be 2, got {other:?}")),
        }
        Ok(parsed)
    }

    fn post(&self, url: &str, texts: &[&str]) -> Result<PerplexityResponse, String> {
        let mut last = String::new();
        for attempt in 0..=self.retries {
            match self.post_once(url, texts) {
                Ok(r) => return Ok(r),
                Err(e) => {
                    log::warn!("perplexity request to {url} failed (attempt {}): {e}", attempt + 1);
                    last = e;
                    if attempt < self.retries {
                        std::thread::sleep(Duration::from_millis(50 << attempt));
                    }
                }
            }
        }
        Err(last)
    }

    /// Scores one batch; transport failures mark every document in the batch.
    fn score_batch(&self, docs: &[&Document]) -> Vec<Result<QualityScore, ScoreError>> {
        let texts: Vec<&str> = docs.iter().map(|d| d.text.as_str()).collect();
        let both = self
            .post(&self.small_url, &texts)
            .and_then(|s| Ok((s, self.post(&self.large_url, &texts)?)));
        match both {
            Err(message) => docs
                .iter()
                .map(|d| {
                    Err(ScoreError::ScorerUnavailable {
                        doc_id: d.id.clone(),
                        message: message.clone(),
                    })
                })
                .collect(),
            Ok((small, large)) => {
                if let (Some(a), Some(b)) = (&small.model, &large.model) {
                    log::debug!("remote pair models: {a} / {b}");
                }
                docs.iter()
                    .zip(small.perplexities.iter().zip(&large.perplexities))
                    .map(|(d, (ps, pl))| {
                        let ps = ps.unwrap_or(f64::NAN);
                        let pl = pl.unwrap_or(f64::NAN);
                        QualityScore::new(&d.id, d.n_bytes, ps, pl)
                    })
                    .collect()
            }
        }
    }
}

/// Where perplexities come from: an in-process n-gram pair or two remote
/// services.
#[derive(Debug, Clone)]
pub enum ScorerEndpoint {
    Local(Arc<MetaModelPair>),
    Remote(RemotePair),
}

impl ScorerEndpoint {
    pub fn local(pair: MetaModelPair) -> Self {
        Self::Local(Arc::new(pair))
    }

    /// Fingerprints of the (small, large) models, part of every cache key.
    pub fn fingerprints(&self) -> (String, String) {
        match self {
            Self::Local(pair) => (pair.small.fingerprint(), pair.large.fingerprint()),
            Self::Remote(r) => (RemotePair::fingerprint(&r.small_url), RemotePair::fingerprint(&r.large_url)),
        }
    }

    fn batch_size(&self) -> usize {
        match self {
            Self::Local(_) => 64,
            Self::Remote(r) => r.batch_size,
        }
    }

    fn score_batch(&self, docs: &[&Document]) -> Vec<Result<QualityScore, ScoreError>> {
        match self {
            Self::Local(pair) => docs.iter().map(|d| score_local(pair, d)).collect(),
            Self::Remote(r) => r.score_batch(docs),
        }
    }
}

fn score_local(pair: &MetaModelPair, doc: &Document) -> Result<QualityScore, ScoreError> {
    QualityScore::new(
        &doc.id,
        doc.n_bytes,
        pair.small.perplexity(doc),
        pair.large.perplexity(doc),
    )
}

pub fn score_document(endpoint: &ScorerEndpoint, doc: &Document) -> Result<QualityScore, ScoreError> {
    endpoint
        .score_batch(&[doc])
        .pop()
        .expect("one result per document")
}

#[derive(Debug, Clone)]
pub struct ScoreConfig {
    /// Score cache file; created when missing.
    pub cache_path: Option<PathBuf>,
    /// Worker threads; 0 uses rayon's default.
    pub workers: usize,
    /// Largest tolerated fraction of failed documents.
    pub error_budget: f64,
    /// Documents per cache flush.
    pub chunk_size: usize,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            cache_path: None,
            workers: 0,
            error_budget: DEFAULT_ERROR_BUDGET,
            chunk_size: 4096,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub count: usize,
    pub errors: usize,
    pub cache_hits: usize,
    pub evaluations: usize,
    pub mean_d: f64,
    pub mean_log2_d: f64,
    pub d_quantiles: Option<Quantiles>,
}

#[derive(Debug, Clone)]
pub struct ScoreOutcome {
    /// Sorted ascending by `doc_id`.
    pub scores: Vec<QualityScore>,
    /// Sorted ascending by `doc_id`.
    pub errors: Vec<(String, ScoreError)>,
    pub summary: ScoreSummary,
}

#[derive(Debug, Clone)]
struct CacheEntry {
    content_hash: u64,
    small_fp: String,
    large_fp: String,
    n_tokens: usize,
    ppl_small: f64,
    ppl_large: f64,
}

struct ScoreCache {
    path: PathBuf,
    entries: HashMap<String, CacheEntry>,
    writer: BufWriter<File>,
}

impl ScoreCache {
    fn open(path: &Path) -> Result<Self, ScoreError> {
        let mut entries = HashMap::new();
        let exists = path.exists();
        if exists {
            let file = File::open(path).map_err(|e| ScoreError::io(path, e))?;
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| ScoreError::io(path, e))?;
                if i == 0 || line.is_empty() {
                    continue;
                }
                // A torn final line from an interrupted run is skipped.
                if let Some((id, entry)) = parse_cache_line(&line) {
                    entries.insert(id, entry);
                }
            }
        } else if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| ScoreError::io(parent, e))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| ScoreError::io(path, e))?;
        let mut writer = BufWriter::new(file);
        if !exists {
            writeln!(writer, "{CACHE_HEADER}").map_err(|e| ScoreError::io(path, e))?;
        }
        Ok(Self {
            path: path.to_path_buf(),
            entries,
            writer,
        })
    }

    fn lookup(&self, doc: &Document, fps: &(String, String)) -> Option<QualityScore> {
        let e = self.entries.get(&doc.id)?;
        if e.content_hash != doc.content_hash() || e.small_fp != fps.0 || e.large_fp != fps.1 {
            return None;
        }
        QualityScore::new(&doc.id, e.n_tokens, e.ppl_small, e.ppl_large).ok()
    }

    fn append(&mut self, doc: &Document, fps: &(String, String), s: &QualityScore) -> Result<(), ScoreError> {
        writeln!(
            self.writer,
            "{}\t{:016x}\t{}\t{}\t{}\t{}\t{}",
            escape(&doc.id),
            doc.content_hash(),
            fps.0,
            fps.1,
            s.n_tokens,
            fmt_f64(s.ppl_small),
            fmt_f64(s.ppl_large)
        )
        .map_err(|e| ScoreError::io(&self.path, e))?;
        self.entries.insert(
            doc.id.clone(),
            CacheEntry {
                content_hash: doc.content_hash(),
                small_fp: fps.0.clone(),
                large_fp: fps.1.clone(),
                n_tokens: s.n_tokens,
                ppl_small: s.ppl_small,
                ppl_large: s.ppl_large,
            },
        );
        Ok(())
    }

    fn flush(&mut self) -> Result<(), ScoreError> {
        self.writer.flush().map_err(|e| ScoreError::io(&self.path, e))
    }
}

fn parse_cache_line(line: &str) -> Option<(String, CacheEntry)> {
    let f: Vec<&str> = line.split('\t').collect();
    if f.len() != 7 {
        return None;
    }
    Some((
        unescape(f[0]),
        CacheEntry {
            content_hash: u64::from_str_radix(f[1], 16).ok()?,
            small_fp: f[2].to_string(),
            large_fp: f[3].to_string(),
            n_tokens: f[4].parse().ok()?,
            ppl_small: f[5].parse().ok()?,
            ppl_large: f[6].parse().ok()?,
        },
    ))
}

/// Scores a document stream.
///
/// Cached rows whose `(doc_id, content hash, small fingerprint, large
/// fingerprint)` match are reused; everything else goes to the endpoint in
/// parallel. New rows are appended to the cache after every chunk so an
/// interrupted run resumes where it stopped. Output order is by `doc_id`,
/// never by completion order.
pub fn score_corpus<I>(endpoint: &ScorerEndpoint, docs: I, config: &ScoreConfig) -> Result<ScoreOutcome, ScoreError>
where
    I: IntoIterator<Item = Document>,
{
    let fps = endpoint.fingerprints();
    let mut cache = config.cache_path.as_deref().map(ScoreCache::open).transpose()?;
    let mut scores = Vec::new();
    let mut errors = Vec::new();
    let mut cache_hits = 0;
    let mut evaluations = 0;

    let chunk_size = config.chunk_size.max(1);
    let mut docs = docs.into_iter().peekable();
    while docs.peek().is_some() {
        let chunk: Vec<Document> = docs.by_ref().take(chunk_size).collect();
        let mut pending: Vec<&Document> = Vec::new();
        for doc in &chunk {
            match cache.as_ref().and_then(|c| c.lookup(doc, &fps)) {
                Some(s) => {
                    cache_hits += 1;
                    scores.push(s);
                }
                None => pending.push(doc),
            }
        }
        evaluations += pending.len();
        let batch = endpoint.batch_size();
        let results: Vec<Result<QualityScore, ScoreError>> = with_pool(config.workers, || {
            pending
                .par_chunks(batch)
                .flat_map_iter(|b| endpoint.score_batch(b))
                .collect()
        });
        for (doc, result) in pending.iter().zip(results) {
            match result {
                Ok(s) => {
                    if let Some(c) = cache.as_mut() {
                        c.append(doc, &fps, &s)?;
                    }
                    scores.push(s);
                }
                Err(e) => errors.push((doc.id.clone(), e)),
            }
        }
        if let Some(c) = cache.as_mut() {
            c.flush()?;
        }
    }

    scores.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    errors.sort_by(|a, b| a.0.cmp(&b.0));
    let ds: Vec<f64> = scores.iter().map(|s| s.d).collect();
    let log_ds: Vec<f64> = scores.iter().map(|s| s.log2_d()).collect();
    let summary = ScoreSummary {
        count: scores.len(),
        errors: errors.len(),
        cache_hits,
        evaluations,
        mean_d: mean(&ds),
        mean_log2_d: mean(&log_ds),
        d_quantiles: Quantiles::of(&ds),
    };
    Ok(ScoreOutcome { scores, errors, summary })
}

impl ScoreOutcome {
    pub fn error_fraction(&self) -> f64 {
        let total = self.scores.len() + self.errors.len();
        if total == 0 {
            0.0
        } else {
            self.errors.len() as f64 / total as f64
        }
    }

    /// Fails when the error fraction exceeds `budget`.
    pub fn check_budget(&self, budget: f64) -> Result<(), ScoreError> {
        if self.error_fraction() > budget {
            return Err(ScoreError::ErrorBudgetExceeded {
                errors: self.errors.len(),
                total: self.scores.len() + self.errors.len(),
                budget,
            });
        }
        Ok(())
    }
}

/// Writes the score TSV: header, then rows in the given order with 17
/// significant digits per float.
pub fn write_score_file(path: &Path, scores: &[QualityScore]) -> Result<(), ScoreError> {
    let file = File::create(path).map_err(|e| ScoreError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(w, "{SCORE_HEADER}")?;
        for s in scores {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}",
                escape(&s.doc_id),
                s.n_tokens,
                fmt_f64(s.ppl_small),
                fmt_f64(s.ppl_large),
                fmt_f64(s.d)
            )?;
        }
        w.flush()
    };
    write().map_err(|e| ScoreError::io(path, e))
}

pub fn read_score_file(path: &Path) -> Result<Vec<QualityScore>, ScoreError> {
    let file = File::open(path).map_err(|e| ScoreError::io(path, e))?;
    let malformed = |line: usize, message: String| ScoreError::Malformed {
        path: path.display().to_string(),
        line,
        message,
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| ScoreError::io(path, e))?;
        if i == 0 {
            if line != SCORE_HEADER {
                return Err(malformed(1, "unexpected header".into()));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(malformed(i + 1, format!("expected 5 fields, got {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| malformed(i + 1, e.to_string()));
        let n_tokens = f[1].parse().map_err(|e: std::num::ParseIntError| malformed(i + 1, e.to_string()))?;
        let score = QualityScore {
            doc_id: unescape(f[0]),
            n_tokens,
            ppl_small: num(f[2])?,
            ppl_large: num(f[3])?,
            d: num(f[4])?,
        };
        quality_factor(score.ppl_small, score.ppl_large)?;
        out.push(score);
    }
    Ok(out)
}

/// Error sidecar: `doc_id<TAB>code<TAB>message`.
pub fn write_error_file(path: &Path, errors: &[(String, ScoreError)]) -> Result<(), ScoreError> {
    let mut body = String::from("doc_id\terror\tmessage\n");
    for (id, e) in errors {
        body.push_str(&format!("{}\t{}\t{}\n", escape(id), e.code(), escape(&e.to_string())));
    }
    fs::write(path, body).map_err(|e| ScoreError::io(path, e))
}
