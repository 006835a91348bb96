//! Document embedders.
//!
//! The hashed-projection embedder is an offline, deterministic stand-in for
//! a served sentence-embedding model: character 3- to 5-gram counts are
//! hashed into 2^18 buckets, projected to `dim` dimensions with a seeded
//! random sign matrix, and L2-normalized. The sign of entry `(bucket, i)` is
//! bit `i % 64` of `xxh3_64_with_seed(bucket_le ++ (i / 64)_le, seed)`, so
//! the matrix is never materialized.

use std::collections::HashMap;
use std::time::Duration;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::{xxh3_64, xxh3_64_with_seed};

use super::DiversityError;
use crate::corpus::Document;

pub const NGRAM_MIN: usize = 3;
pub const NGRAM_MAX: usize = 5;
pub const HASH_BUCKETS_LOG2: u32 = 18;
pub const DEFAULT_DIM: usize = 256;

#[derive(Debug, Clone)]
pub enum EmbeddingProvider {
    HashedProjection { dim: usize, seed: u64 },
    Remote(RemoteEmbedder),
}

impl EmbeddingProvider {
    pub fn hashed(dim: usize, seed: u64) -> Result<Self, DiversityError> {
        if dim < 2 {
            return Err(DiversityError::InvalidDimension(dim));
        }
        Ok(Self::HashedProjection { dim, seed })
    }

    /// Identifies the embedder; diversity values are comparable only between
    /// reports with equal fingerprints.
    pub fn fingerprint(&self) -> String {
        match self {
            Self::HashedProjection { dim, seed } => format!(
                "hashed-projection:char{NGRAM_MIN}-{NGRAM_MAX}:buckets=2^{HASH_BUCKETS_LOG2}:dim={dim}:seed={seed}"
            ),
            Self::Remote(r) => format!("remote:{}", r.url),
        }
    }

    /// Embeds documents as the rows of an `n x m` matrix of unit vectors.
    pub fn embed(&self, docs: &[&Document]) -> Result<DMatrix<f64>, DiversityError> {
        if docs.is_empty() {
            return Err(DiversityError::EmptyInput);
        }
        match self {
            Self::HashedProjection { dim, seed } => {
                let rows = docs
                    .par_iter()
                    .map(|d| {
                        hashed_embedding(&d.text, *dim, *seed)
                            .ok_or_else(|| DiversityError::DegenerateEmbedding(d.id.clone()))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(rows_to_matrix(&rows, *dim))
            }
            Self::Remote(r) => r.embed(docs),
        }
    }
}

fn rows_to_matrix(rows: &[Vec<f64>], dim: usize) -> DMatrix<f64> {
    DMatrix::from_row_iterator(rows.len(), dim, rows.iter().flatten().copied())
}

/// Sparse hashed character n-gram counts of a text.
pub fn ngram_counts(text: &str) -> HashMap<u32, f64> {
    let bounds: Vec<usize> = text
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(text.len()))
        .collect();
    let n_chars = bounds.len() - 1;
    let mask = (1u64 << HASH_BUCKETS_LOG2) - 1;
    let mut counts = HashMap::new();
    for n in NGRAM_MIN..=NGRAM_MAX {
        if n_chars < n {
            break;
        }
        for start in 0..=n_chars - n {
            let gram = &text.as_bytes()[bounds[start]..bounds[start + n]];
            *counts.entry((xxh3_64(gram) & mask) as u32).or_insert(0.0) += 1.0;
        }
    }
    counts
}

/// Unit-norm hashed-projection embedding, or `None` when the projected
/// vector is zero (for instance a text shorter than three characters).
pub fn hashed_embedding(text: &str, dim: usize, seed: u64) -> Option<Vec<f64>> {
    let mut counts: Vec<(u32, f64)> = ngram_counts(text).into_iter().collect();
    counts.sort_unstable_by_key(|c| c.0);
    let words = dim.div_ceil(64);
    let mut v = vec![0.0; dim];
    let mut key = [0u8; 12];
    for (bucket, count) in counts {
        key[..4].copy_from_slice(&bucket.to_le_bytes());
        for w in 0..words {
            key[4..].copy_from_slice(&(w as u64).to_le_bytes());
            let bits = xxh3_64_with_seed(&key, seed);
            let lo = w * 64;
            for (i, slot) in v[lo..(lo + 64).min(dim)].iter_mut().enumerate() {
                if (bits >> i) & 1 == 1 {
                    *slot += count;
                } else {
                    *slot -= count;
                }
            }
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Some(v)
}

/// Client for `POST /v1/embed {"texts": [...]}` →
/// `{"embeddings": [[...], ...], "model": "...", "normalized": true}`.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    pub url: String,
    pub batch_size: usize,
    pub retries: usize,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: Vec<&'a str>,
}

#[derive(Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f64>>,
    #[serde(default)]
    model: Option<String>,
    #[serde(default)]
    normalized: Option<bool>,
}

impl RemoteEmbedder {
    pub fn new(base_url: &str, batch_size: usize, timeout: Duration) -> Self {
        let base = base_url.trim_end_matches('/');
        let url = if base.ends_with("/v1/embed") {
            base.to_string()
        } else {
            format!("{base}/v1/embed")
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .expect("http client");
        Self {
            url,
            batch_size: batch_size.max(1),
            retries: 3,
            client,
        }
    }

    fn post(&self, texts: &[&str]) -> Result<EmbedResponse, String> {
        let mut last = String::new();
        for attempt in 0..=self.retries {
            let result = self
                .client
                .post(&self.url)
                .json(&EmbedRequest { texts: texts.to_vec() })
                .send()
                .map_err(|e| e.to_string())
                .and_then(|r| {
                    if r.status().is_success() {
                        r.json::<EmbedResponse>().map_err(|e| e.to_string())
                    } else {
                        Err(format!("http status {}", r.status()))
                    }
                });
            match result {
                Ok(r) if r.embeddings.len() == texts.len() => return Ok(r),
                Ok(r) => {
                    last = format!("expected {} embeddings, got {}", texts.len(), r.embeddings.len());
                }
                Err(e) => last = e,
            }
            log::warn!("embed request to {} failed (attempt {}): {last}", self.url, attempt + 1);
            if attempt < self.retries {
                std::thread::sleep(Duration::from_millis(50 << attempt));
            }
        }
        Err(last)
    }

    fn embed(&self, docs: &[&Document]) -> Result<DMatrix<f64>, DiversityError> {
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(docs.len());
        for batch in docs.chunks(self.batch_size) {
            let texts: Vec<&str> = batch.iter().map(|d| d.text.as_str()).collect();
            let resp = self.post(&texts).map_err(DiversityError::EmbedderUnavailable)?;
            if let Some(model) = &resp.model {
                log::debug!("embedding model {model}, normalized = {:?}", resp.normalized);
            }
            for (doc, mut row) in batch.iter().zip(resp.embeddings) {
                let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                if !(norm > 0.0 && norm.is_finite()) {
                    return Err(DiversityError::DegenerateEmbedding(doc.id.clone()));
                }
                row.iter_mut().for_each(|x| *x /= norm);
                rows.push(row);
            }
        }
        let dim = rows[0].len();
        if dim < 2 || rows.iter().any(|r| r.len() != dim) {
            return Err(DiversityError::EmbedderUnavailable("inconsistent embedding dimensions".into()));
        }
        Ok(rows_to_matrix(&rows, dim))
    }
}
