//! Byte-level n-gram meta-models.
//!
//! Capacity grows with the n-gram order. Probabilities use add-k smoothing
//! over the 256-byte alphabet:
//!
//! ```text
//! P(t | c) = (count(c, t) + k) / (count(c) + 256 k)
//! ```
//!
//! Each document is preceded by `order - 1` boundary symbols that only ever
//! appear as context, so perplexity never leaks across documents.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::Document;

pub const VOCAB_SIZE: usize = 256;
/// Context-only symbol padding the start of every document.
pub const BOUNDARY: u16 = 256;
pub const MAX_ORDER: usize = 7;
pub const DEFAULT_SMOOTHING_K: f64 = 0.01;
pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"NGLM";

#[derive(Debug, Error)]
pub enum LmError {
    #[error("no-training-data")]
    NoTrainingData,
    #[error("invalid order {0}: must be in 1..={MAX_ORDER}")]
    InvalidOrder(usize),
    #[error("invalid smoothing k {0}: must be finite and positive")]
    InvalidSmoothing(f64),
    #[error("invalid-pair-spec: small order {small} must be below large order {large}")]
    InvalidPairSpec { small: usize, large: usize },
    #[error("empty-text")]
    EmptyText,
    #[error("invalid model file: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl LmError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::NoTrainingData => "no-training-data",
            Self::InvalidOrder(_) | Self::InvalidSmoothing(_) => "invalid-model-spec",
            Self::InvalidPairSpec { .. } => "invalid-pair-spec",
            Self::EmptyText => "empty-text",
            Self::Format(_) => "invalid-model-file",
            Self::Io(_) => "io",
        }
    }
}

/// The byte tokens of a text.
pub fn tokenize(text: &str) -> Result<&[u8], LmError> {
    if text.is_empty() {
        return Err(LmError::EmptyText);
    }
    Ok(text.as_bytes())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    order: usize,
    smoothing_k: f64,
    /// `(context << 8) | next_byte` to occurrence count; zero counts are absent.
    pair_counts: HashMap<u64, u64>,
    /// Context to total occurrences as a prediction context.
    context_totals: HashMap<u64, u64>,
    total_tokens_trained: u64,
}

/// Rolling encoding of the last `order - 1` symbols, 9 bits per symbol.
#[derive(Clone, Copy)]
struct Context {
    code: u64,
    mask: u64,
}

impl Context {
    fn start(order: usize) -> Self {
        let width = 9 * (order - 1) as u32;
        let mask = if width == 0 { 0 } else { (1u64 << width) - 1 };
        let mut code = 0u64;
        for _ in 0..order - 1 {
            code = (code << 9) | BOUNDARY as u64;
        }
        Self {
            code: code & mask,
            mask,
        }
    }

    fn push(&mut self, byte: u8) {
        self.code = ((self.code << 9) | byte as u64) & self.mask;
    }

    fn key(self, next: u8) -> u64 {
        (self.code << 8) | next as u64
    }
}

fn encode_context(symbols: &[u16]) -> u64 {
    symbols
        .iter()
        .fold(0u64, |acc, &s| (acc << 9) | (s as u64 & 0x1ff))
}

impl NGramModel {
    /// A model with no observed counts; every byte has probability 1/256.
    pub fn empty(order: usize, smoothing_k: f64) -> Result<Self, LmError> {
        if order == 0 || order > MAX_ORDER {
            return Err(LmError::InvalidOrder(order));
        }
        if !(smoothing_k.is_finite() && smoothing_k > 0.0) {
            return Err(LmError::InvalidSmoothing(smoothing_k));
        }
        Ok(Self {
            order,
            smoothing_k,
            pair_counts: HashMap::new(),
            context_totals: HashMap::new(),
            total_tokens_trained: 0,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing_k(&self) -> f64 {
        self.smoothing_k
    }

    pub fn vocab_size(&self) -> usize {
        VOCAB_SIZE
    }

    pub fn total_tokens_trained(&self) -> u64 {
        self.total_tokens_trained
    }

    /// Number of stored (context, next byte) entries.
    pub fn num_entries(&self) -> usize {
        self.pair_counts.len()
    }

    fn observe(&mut self, bytes: &[u8]) {
        let mut ctx = Context::start(self.order);
        for &b in bytes {
            *self.pair_counts.entry(ctx.key(b)).or_default() += 1;
            *self.context_totals.entry(ctx.code).or_default() += 1;
            ctx.push(b);
        }
        self.total_tokens_trained += bytes.len() as u64;
    }

    fn merge(mut self, other: Self) -> Self {
        for (k, v) in other.pair_counts {
            *self.pair_counts.entry(k).or_default() += v;
        }
        for (k, v) in other.context_totals {
            *self.context_totals.entry(k).or_default() += v;
        }
        self.total_tokens_trained += other.total_tokens_trained;
        self
    }

    /// Observed count of `next` after `context` (`order - 1` symbols, where
    /// [`BOUNDARY`] marks the document start).
    pub fn count(&self, context: &[u16], next: u8) -> u64 {
        assert_eq!(context.len(), self.order - 1, "context length");
        let key = (encode_context(context) << 8) | next as u64;
        self.pair_counts.get(&key).copied().unwrap_or(0)
    }

    pub fn context_count(&self, context: &[u16]) -> u64 {
        assert_eq!(context.len(), self.order - 1, "context length");
        self.context_totals
            .get(&encode_context(context))
            .copied()
            .unwrap_or(0)
    }

    /// Smoothed `P(next | context)`.
    pub fn probability(&self, context: &[u16], next: u8) -> f64 {
        let c = self.count(context, next) as f64;
        let total = self.context_count(context) as f64;
        (c + self.smoothing_k) / (total + self.smoothing_k * VOCAB_SIZE as f64)
    }

    /// Sum of `-log2 P` over the byte tokens of `bytes`.
    fn total_bits(&self, bytes: &[u8]) -> f64 {
        let k = self.smoothing_k;
        let denom_k = k * VOCAB_SIZE as f64;
        let mut ctx = Context::start(self.order);
        let mut nats = 0.0;
        for &b in bytes {
            let c = self.pair_counts.get(&ctx.key(b)).copied().unwrap_or(0) as f64;
            let total = self.context_totals.get(&ctx.code).copied().unwrap_or(0) as f64;
            nats -= ((c + k) / (total + denom_k)).ln();
            ctx.push(b);
        }
        nats / std::f64::consts::LN_2
    }

    /// Mean cross-entropy in bits per byte token.
    pub fn cross_entropy_text(&self, text: &str) -> Result<f64, LmError> {
        let bytes = tokenize(text)?;
        Ok(self.total_bits(bytes) / bytes.len() as f64)
    }

    pub fn cross_entropy(&self, doc: &Document) -> f64 {
        self.cross_entropy_text(&doc.text)
            .expect("validated documents are non-empty")
    }

    /// `2^L` with `L` the cross-entropy in bits per token.
    pub fn perplexity(&self, doc: &Document) -> f64 {
        self.cross_entropy(doc).exp2()
    }

    pub fn perplexity_text(&self, text: &str) -> Result<f64, LmError> {
        Ok(self.cross_entropy_text(text)?.exp2())
    }

    /// Versioned little-endian binary encoding. Entries are sorted by key,
    /// so equal models always serialize to equal bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut entries: Vec<(u64, u64)> = self.pair_counts.iter().map(|(&k, &v)| (k, v)).collect();
        entries.sort_unstable();
        let mut out = Vec::with_capacity(44 + entries.len() * 16);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.order as u32).to_le_bytes());
        out.extend_from_slice(&self.smoothing_k.to_bits().to_le_bytes());
        out.extend_from_slice(&(VOCAB_SIZE as u32).to_le_bytes());
        out.extend_from_slice(&self.total_tokens_trained.to_le_bytes());
        out.extend_from_slice(&(entries.len() as u64).to_le_bytes());
        for (k, v) in entries {
            out.extend_from_slice(&k.to_le_bytes());
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, LmError> {
        let mut r = ByteReader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(LmError::Format("bad magic".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(LmError::Format(format!("unsupported version {version}")));
        }
        let order = r.u32()? as usize;
        let k = f64::from_bits(r.u64()?);
        let vocab = r.u32()? as usize;
        if vocab != VOCAB_SIZE {
            return Err(LmError::Format(format!("vocab size {vocab}")));
        }
        let mut model = Self::empty(order, k)?;
        model.total_tokens_trained = r.u64()?;
        let n = r.u64()? as usize;
        model.pair_counts.reserve(n);
        for _ in 0..n {
            let key = r.u64()?;
            let count = r.u64()?;
            if count == 0 {
                return Err(LmError::Format("zero count stored".into()));
            }
            model.pair_counts.insert(key, count);
            *model.context_totals.entry(key >> 8).or_default() += count;
        }
        if r.pos != bytes.len() {
            return Err(LmError::Format("trailing bytes".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), LmError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, LmError> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// Stable fingerprint of the serialized model.
    pub fn fingerprint(&self) -> String {
        format!("{:016x}", xxhash_rust::xxh3::xxh3_64(&self.to_bytes()))
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], LmError> {
        let end = self.pos + n;
        let slice = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| LmError::Format("truncated".into()))?;
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, LmError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, LmError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Counts every byte window of every document. Documents are counted in
/// parallel chunks and merged; counts are order-free so the result does not
/// depend on scheduling.
pub fn train_ngram(docs: &[Document], order: usize, smoothing_k: f64) -> Result<NGramModel, LmError> {
    let empty = NGramModel::empty(order, smoothing_k)?;
    if docs.is_empty() {
        return Err(LmError::NoTrainingData);
    }
    let model = docs
        .par_chunks(256)
        .map(|chunk| {
            let mut m = empty.clone();
            for d in chunk {
                m.observe(d.text.as_bytes());
            }
            m
        })
        .reduce(|| empty.clone(), NGramModel::merge);
    Ok(model)
}

/// Two models of unequal capacity trained on one corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaModelPair {
    pub small: NGramModel,
    pub large: NGramModel,
    pub train_corpus_id: String,
}

impl MetaModelPair {
    pub fn new(small: NGramModel, large: NGramModel, train_corpus_id: impl Into<String>) -> Result<Self, LmError> {
        if small.order >= large.order {
            return Err(LmError::InvalidPairSpec {
                small: small.order,
                large: large.order,
            });
        }
        Ok(Self {
            small,
            large,
            train_corpus_id: train_corpus_id.into(),
        })
    }
}

pub fn train_pair(
    docs: &[Document],
    train_corpus_id: &str,
    small_order: usize,
    large_order: usize,
    smoothing_k: f64,
) -> Result<MetaModelPair, LmError> {
    if small_order >= large_order {
        return Err(LmError::InvalidPairSpec {
            small: small_order,
            large: large_order,
        });
    }
    let small = train_ngram(docs, small_order, smoothing_k)?;
    let large = train_ngram(docs, large_order, smoothing_k)?;
    MetaModelPair::new(small, large, train_corpus_id)
}
