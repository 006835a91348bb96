//! Semantic diversity of document sets.
//!
//! Diversity is `exp(H)` where `H` is the Shannon entropy of the eigenvalues
//! of the normalized cosine-similarity matrix of document embeddings. It is
//! the effective number of distinct directions in the set, between 1 (all
//! documents identical) and `n` (mutually orthogonal).

mod embed;
mod spectrum;

pub use embed::{
    hashed_embedding, ngram_counts, EmbeddingProvider, RemoteEmbedder, DEFAULT_DIM,
    HASH_BUCKETS_LOG2, NGRAM_MAX, NGRAM_MIN,
};
pub use spectrum::{
    diversity_of_embeddings, diversity_of_similarity, embedding_spectrum, spectral_entropy,
    SimilarityMatrix, PSD_TOLERANCE,
};

use itertools::Itertools;
use rand::seq::index;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Document;
use crate::rng;
use crate::stats;

/// Desk default; 10,000 is the fidelity setting.
pub const DEFAULT_SAMPLE_SIZE: usize = 1_000;
pub const DEFAULT_REPEATS: usize = 10;

#[derive(Debug, Error)]
pub enum DiversityError {
    #[error("no documents to embed")]
    EmptyInput,
    #[error("document {0} has a zero embedding")]
    DegenerateEmbedding(String),
    #[error("embedding dimension must be at least 2, got {0}")]
    InvalidDimension(usize),
    #[error("embedder unavailable: {0}")]
    EmbedderUnavailable(String),
    #[error("similarity spectrum is not positive semidefinite (eigenvalue {0})")]
    NotPsd(f64),
    #[error("invalid similarity matrix: {0}")]
    InvalidSimilarity(String),
    #[error("corpus {corpus} has {available} documents, {needed} needed")]
    CorpusTooSmall { corpus: String, available: usize, needed: usize },
    #[error("invalid sampling parameters: {0}")]
    InvalidParams(String),
}

impl DiversityError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::EmptyInput => "empty-input",
            Self::DegenerateEmbedding(_) => "degenerate-embedding",
            Self::InvalidDimension(_) => "invalid-dimension",
            Self::EmbedderUnavailable(_) => "embedder-unavailable",
            Self::NotPsd(_) => "not-psd",
            Self::InvalidSimilarity(_) => "invalid-similarity",
            Self::CorpusTooSmall { .. } => "corpus-too-small",
            Self::InvalidParams(_) => "invalid-params",
        }
    }
}

/// Diversity of one corpus measured over repeated random subsamples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub corpus_id: String,
    pub sample_size: usize,
    pub repeats: usize,
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub seed: u64,
    pub embedder: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Semantic diversity of a document set.
pub fn semantic_diversity(
    docs: &[&Document],
    provider: &EmbeddingProvider,
) -> Result<f64, DiversityError> {
    diversity_of_embeddings(&provider.embed(docs)?)
}

fn member_rng(seed: u64, repeat: usize, member: usize) -> rng::StreamRng {
    let s = rng::derive_indexed(seed, "diversity-repeat", repeat as u64);
    rng::stream(rng::derive_indexed(s, "member", member as u64))
}

/// Draws `k` distinct documents without replacement, in corpus order.
fn draw<'a>(
    corpus_id: &str,
    docs: &'a [Document],
    k: usize,
    rng: &mut rng::StreamRng,
) -> Result<Vec<&'a Document>, DiversityError> {
    if docs.len() < k {
        return Err(DiversityError::CorpusTooSmall {
            corpus: corpus_id.to_string(),
            available: docs.len(),
            needed: k,
        });
    }
    let mut picked = index::sample(rng, docs.len(), k).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| &docs[i]).collect())
}

fn check_sampling(n: usize, repeats: usize) -> Result<(), DiversityError> {
    if n == 0 || repeats == 0 {
        return Err(DiversityError::InvalidParams(format!(
            "sample size {n} and repeats {repeats} must be positive"
        )));
    }
    Ok(())
}

/// Mean and standard deviation of diversity over `repeats` subsamples of
/// `n` documents each.
pub fn subsample_diversity(
    corpus_id: &str,
    docs: &[Document],
    provider: &EmbeddingProvider,
    n: usize,
    repeats: usize,
    seed: u64,
) -> Result<DiversityReport, DiversityError> {
    check_sampling(n, repeats)?;
    let mut values = Vec::with_capacity(repeats);
    for r in 0..repeats {
        let sample = draw(corpus_id, docs, n, &mut member_rng(seed, r, 0))?;
        values.push(semantic_diversity(&sample, provider)?);
        log::debug!("{corpus_id}: repeat {r} diversity {:.6}", values[r]);
    }
    let note = (repeats < 2).then(|| "single repeat; std is zero".to_string());
    Ok(DiversityReport {
        corpus_id: corpus_id.to_string(),
        sample_size: n,
        repeats,
        mean: stats::mean(&values),
        std: stats::std_dev(&values),
        values,
        seed,
        embedder: provider.fingerprint(),
        note,
    })
}

/// Diversity of mixtures of `k` corpora for one value of `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixPoint {
    pub n_datasets: usize,
    pub combinations: Vec<Vec<String>>,
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixCurve {
    pub sample_size: usize,
    pub repeats: usize,
    pub seed: u64,
    pub embedder: String,
    pub points: Vec<MixPoint>,
}

/// For every mixture size `k` in `1..=corpora.len()`, measures diversity of
/// `n`-document samples drawn evenly from each `k`-subset of the corpora.
/// Member `j` of a mixture contributes `n / k` documents, plus one while
/// `j < n % k`. With `k = 1` this reproduces [`subsample_diversity`] for the
/// same seed. `max_combinations` caps the subsets evaluated per `k`, chosen
/// by seeded sampling.
pub fn dataset_mix_experiment(
    corpora: &[(String, Vec<Document>)],
    provider: &EmbeddingProvider,
    n: usize,
    repeats: usize,
    seed: u64,
    max_combinations: Option<usize>,
) -> Result<MixCurve, DiversityError> {
    check_sampling(n, repeats)?;
    if corpora.len() < 2 {
        return Err(DiversityError::InvalidParams("a mixture curve needs at least two corpora".into()));
    }
    let mut points = Vec::with_capacity(corpora.len());
    for k in 1..=corpora.len() {
        if n < k {
            return Err(DiversityError::InvalidParams(format!(
                "sample size {n} is smaller than the mixture size {k}"
            )));
        }
        let mut combos: Vec<Vec<usize>> = (0..corpora.len()).combinations(k).collect();
        if let Some(cap) = max_combinations.filter(|&c| c > 0 && c < combos.len()) {
            let mut r = rng::stream(rng::derive_indexed(seed, "mix-combinations", k as u64));
            let mut keep = index::sample(&mut r, combos.len(), cap).into_vec();
            keep.sort_unstable();
            combos = keep.into_iter().map(|i| combos[i].clone()).collect();
        }
        let mut values = Vec::with_capacity(combos.len() * repeats);
        for combo in &combos {
            for r in 0..repeats {
                let mut sample = Vec::with_capacity(n);
                for (j, &c) in combo.iter().enumerate() {
                    let take = n / k + usize::from(j < n % k);
                    let (id, docs) = &corpora[c];
                    sample.extend(draw(id, docs, take, &mut member_rng(seed, r, j))?);
                }
                values.push(semantic_diversity(&sample, provider)?);
            }
        }
        log::info!("mixture size {k}: {} combinations, mean {:.4}", combos.len(), stats::mean(&values));
        points.push(MixPoint {
            n_datasets: k,
            combinations: combos
                .iter()
                .map(|c| c.iter().map(|&i| corpora[i].0.clone()).collect())
                .collect(),
            mean: stats::mean(&values),
            std: stats::std_dev(&values),
            values,
        });
    }
    Ok(MixCurve {
        sample_size: n,
        repeats,
        seed,
        embedder: provider.fingerprint(),
        points,
    })
}
