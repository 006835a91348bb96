//! Reference-free quality filtering for pretraining corpora.
//!
//! Documents are scored by the ratio between the perplexities that two
//! language models of unequal capacity, trained on the same data, assign to
//! them. High ratios mark text whose loss falls quickly with model size, which
//! under a Chinchilla-style parametric loss corresponds to a larger model
//! scaling exponent. The crate covers the whole loop:
//!
//! * [`corpus`]: sharded JSONL corpora with manifests.
//! * [`lm`]: byte-level n-gram meta-models with exact perplexity.
//! * [`scorer`]: per-document quality factors, local or remote, cached.
//! * [`selection`]: top-k, temperature sampling, perplexity gating and
//!   Pareto noisy thresholding.
//! * [`diversity`]: eigenvalue-entropy semantic diversity of document sets.
//! * [`scaling`]: numeric verification of the parametric-loss argument.

pub mod corpus;
pub mod diversity;
pub mod lm;
pub mod rng;
pub mod scaling;
pub mod scorer;
pub mod selection;
pub mod stats;
pub mod tsv;

pub use corpus::{CorpusManifest, Document};
pub use diversity::{DiversityReport, EmbeddingProvider};
pub use lm::{MetaModelPair, NGramModel};
pub use scaling::ScalingLawParams;
pub use scorer::{QualityScore, ScorerEndpoint};
pub use selection::{SelectionPolicy, SelectionResult};
