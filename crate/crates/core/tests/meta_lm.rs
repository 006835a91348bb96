mod common;

use common::oracle::CountOracle;
use common::synth;
use dataqual::lm::{self, train_ngram, train_pair, NGramModel, BOUNDARY};
use dataqual::Document;
use proptest::prelude::*;

fn toy_corpus() -> Vec<Document> {
    let mut docs = synth::random_docs(11, 60, 120);
    let chain = synth::WordChain::new(5, 60, 3);
    docs.extend(synth::clean_corpus(&chain, 6, 40, "w"));
    assert_eq!(docs.len(), 100);
    docs
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

#[test]
fn order_three_counts_match_single_pass_count() {
    let docs = toy_corpus();
    let model = train_ngram(&docs, 3, 0.01).unwrap();
    let oracle = CountOracle::train(&docs, 3, 0.01);
    assert_eq!(model.num_entries(), oracle.pairs.len());
    assert_eq!(model.total_tokens_trained(), oracle.tokens);
    for ((ctx, next), &count) in &oracle.pairs {
        assert_eq!(model.count(ctx, *next), count, "{ctx:?} -> {next}");
    }
    for (ctx, &count) in &oracle.contexts {
        assert_eq!(model.context_count(ctx), count);
    }
    assert_eq!(model.count(&[b'q' as u16, BOUNDARY], b'q'), 0);
}

#[test]
fn cross_entropy_matches_per_token_oracle() {
    let docs = toy_corpus();
    let held_out = synth::random_docs(99, 30, 200);
    for order in [1, 2, 3, 5] {
        let model = train_ngram(&docs, order, 0.01).unwrap();
        let oracle = CountOracle::train(&docs, order, 0.01);
        for d in docs.iter().chain(&held_out) {
            let expected = oracle.cross_entropy(&d.text);
            let got = model.cross_entropy(d);
            assert!(rel_err(got, expected) < 1e-9, "order {order} {}: {got} vs {expected}", d.id);
            assert!(rel_err(model.perplexity(d), expected.exp2()) < 1e-9);
        }
    }
}

#[test]
fn probabilities_sum_to_one_in_every_context() {
    let docs = toy_corpus();
    for order in [1, 2, 4] {
        let model = train_ngram(&docs, order, 0.01).unwrap();
        let oracle = CountOracle::train(&docs, order, 0.01);
        let unseen = vec![b'~' as u16; order - 1];
        for ctx in oracle.contexts.keys().chain(std::iter::once(&unseen)) {
            let total: f64 = (0..=255u8).map(|b| model.probability(ctx, b)).sum();
            assert!((total - 1.0).abs() < 1e-12, "{ctx:?}: {total}");
        }
    }
}

#[test]
fn untrained_model_is_uniform() {
    let m = NGramModel::empty(3, 0.5).unwrap();
    let d = synth::doc("u", "any text at all");
    assert_eq!(m.cross_entropy(&d), 8.0);
    assert_eq!(m.perplexity(&d), 256.0);
}

#[test]
fn training_order_does_not_matter() {
    let docs = toy_corpus();
    let mut reversed = docs.clone();
    reversed.reverse();
    let a = train_ngram(&docs, 4, 0.01).unwrap();
    let b = train_ngram(&reversed, 4, 0.01).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_bytes(), b.to_bytes());
}

#[test]
fn capacity_lowers_held_in_loss() {
    let chain = synth::WordChain::new(21, 300, 4);
    let docs = synth::clean_corpus(&chain, 22, 600, "h");
    let mut previous = f64::INFINITY;
    for order in [1, 2, 3, 5] {
        let model = train_ngram(&docs, order, 0.01).unwrap();
        let mean = docs.iter().map(|d| model.cross_entropy(d)).sum::<f64>() / docs.len() as f64;
        assert!(mean < previous, "order {order}: {mean} >= {previous}");
        previous = mean;
    }
}

#[test]
fn megabyte_corpus_large_model_has_lower_loss() {
    let chain = synth::WordChain::new(31, 2000, 6);
    let docs = synth::clean_corpus(&chain, 32, 4000, "m");
    let bytes: usize = docs.iter().map(|d| d.n_bytes).sum();
    assert!(bytes > 1_000_000, "{bytes}");
    let pair = train_pair(&docs, "m", 2, 5, lm::DEFAULT_SMOOTHING_K).unwrap();
    let mean = |m: &NGramModel| docs.iter().map(|d| m.cross_entropy(d)).sum::<f64>() / docs.len() as f64;
    assert!(mean(&pair.large) < mean(&pair.small));
}

#[test]
fn saved_model_reloads_bit_identically() {
    let docs = toy_corpus();
    let dir = tempfile::tempdir().unwrap();
    let model = train_ngram(&docs, 5, 0.25).unwrap();
    let path = dir.path().join("m.bin");
    model.save(&path).unwrap();
    let back = NGramModel::load(&path).unwrap();
    assert_eq!(back, model);
    assert_eq!(back.fingerprint(), model.fingerprint());
    for d in &docs {
        assert_eq!(back.perplexity(d).to_bits(), model.perplexity(d).to_bits());
    }
}

#[test]
fn pair_orders_are_checked() {
    let docs = toy_corpus();
    let pair = train_pair(&docs, "toy", 2, 5, 0.01).unwrap();
    assert_eq!((pair.small.order(), pair.large.order()), (2, 5));
    for (s, l) in [(5, 2), (3, 3)] {
        let e = train_pair(&docs, "toy", s, l, 0.01).unwrap_err();
        assert_eq!(e.code(), "invalid-pair-spec");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn any_text_matches_oracle(
        train in prop::collection::vec("[ab c\\n]{1,30}", 1..8),
        eval in "[abcdé ]{1,40}",
        order in 1usize..=6,
        k in 0.001f64..2.0,
    ) {
        let docs: Vec<Document> = train
            .iter()
            .enumerate()
            .filter(|(_, t)| !t.trim().is_empty())
            .map(|(i, t)| synth::doc(format!("t{i}"), t.clone()))
            .collect();
        prop_assume!(!docs.is_empty() && !eval.trim().is_empty());
        let model = train_ngram(&docs, order, k).unwrap();
        let oracle = CountOracle::train(&docs, order, k);
        let got = model.cross_entropy_text(&eval).unwrap();
        prop_assert!(rel_err(got, oracle.cross_entropy(&eval)) < 1e-9);
        prop_assert!(got > 0.0 && got.is_finite());
    }
}
