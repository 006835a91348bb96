mod common;

use std::fs;

use common::synth;
use dataqual::corpus::{self, load_corpus, read_corpus, write_corpus, CorpusManifest, ReadError};
use proptest::prelude::*;

#[test]
fn ten_thousand_line_shard_rereads_identically() {
    let dir = tempfile::tempdir().unwrap();
    let docs = synth::random_docs(1, 10_000, 80);
    write_corpus(docs.clone(), dir.path(), 10_000, "big").unwrap();
    let shards = corpus::corpus_shards(dir.path()).unwrap();
    assert_eq!(shards.len(), 1);
    let first: Vec<_> = read_corpus(&shards).map(|r| r.unwrap()).collect();
    let second: Vec<_> = read_corpus(&shards).map(|r| r.unwrap()).collect();
    assert_eq!(first, second);
    assert_eq!(first, docs);
}

#[test]
fn parallel_load_matches_streaming_order() {
    let dir = tempfile::tempdir().unwrap();
    let docs = synth::random_docs(2, 997, 40);
    write_corpus(docs, dir.path(), 50, "p").unwrap();
    let shards = corpus::corpus_shards(dir.path()).unwrap();
    let streamed: Vec<_> = read_corpus(&shards).map(|r| r.unwrap()).collect();
    for workers in [1, 3, 8] {
        let loaded = load_corpus(&shards, workers).unwrap();
        assert!(loaded.errors.is_empty());
        assert_eq!(loaded.documents, streamed);
    }
}

#[test]
fn every_line_is_accounted_for() {
    let dir = tempfile::tempdir().unwrap();
    let shard = dir.path().join("s0.jsonl");
    fs::write(
        &shard,
        concat!(
            "{\"id\":\"a\",\"text\":\"hello\"}\n",
            "not json\n",
            "{\"id\":\"b\",\"text\":\"  \"}\n",
            "{\"text\":\"no id\"}\n",
            "{\"id\":\"a\",\"text\":\"again\"}\n",
            "{\"id\":\"c\",\"text\":\"fine\",\"source\":\"web\"}\n",
        ),
    )
    .unwrap();
    let loaded = load_corpus(&[&shard], 2).unwrap();
    assert_eq!(loaded.lines(), 6);
    let ids: Vec<&str> = loaded.documents.iter().map(|d| d.id.as_str()).collect();
    assert_eq!(ids, ["a", "s0:4", "c"]);
    let codes: Vec<(usize, &str)> = loaded.errors.iter().map(|e| (e.line, e.kind.code())).collect();
    assert_eq!(codes, [(2, "malformed"), (3, "empty-text"), (5, "duplicate-id")]);
    assert_eq!(loaded.documents[2].source.as_deref(), Some("web"));

    let streamed: Vec<_> = read_corpus(&[&shard]).collect();
    assert_eq!(streamed.len(), 6);
    assert_eq!(streamed.iter().filter(|r| r.is_ok()).count(), 3);
}

#[test]
fn invalid_utf8_is_an_encoding_error() {
    let dir = tempfile::tempdir().unwrap();
    let shard = dir.path().join("bad.jsonl");
    let mut bytes = b"{\"id\":\"x\",\"text\":\"ok\"}\n{\"id\":\"y\",\"text\":\"".to_vec();
    bytes.extend_from_slice(&[0xff, 0xfe]);
    bytes.extend_from_slice(b"\"}\n");
    fs::write(&shard, bytes).unwrap();
    let results: Vec<_> = read_corpus(&[&shard]).collect();
    assert!(results[0].is_ok());
    match &results[1] {
        Err(ReadError::Record(e)) => assert_eq!(e.kind.code(), "encoding"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn missing_shard_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.jsonl");
    let results: Vec<_> = read_corpus(&[&missing]).collect();
    assert_eq!(results.len(), 1);
    assert!(matches!(results[0], Err(ReadError::Fatal(_))));
    assert!(load_corpus(&[&missing], 1).is_err());
}

#[test]
fn rewriting_is_byte_identical_apart_from_timestamp() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let docs = synth::random_docs(3, 10, 30);
    let ma = write_corpus(docs.clone(), a.path(), 4, "ten").unwrap();
    let mb = write_corpus(docs, b.path(), 4, "ten").unwrap();
    assert_eq!(ma.shard_paths, mb.shard_paths);
    assert_eq!(ma.shard_doc_counts, vec![4, 4, 2]);
    for name in &ma.shard_paths {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
    }
    let reloaded = CorpusManifest::load(a.path()).unwrap();
    assert_eq!(reloaded, ma);
    assert_eq!(CorpusManifest { created_at: mb.created_at, ..ma }, mb);
}

#[test]
fn shrinking_rewrite_drops_stale_shards() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(synth::random_docs(4, 9, 20), dir.path(), 2, "x").unwrap();
    let m = write_corpus(synth::random_docs(4, 3, 20), dir.path(), 2, "x").unwrap();
    let shards = corpus::corpus_shards(dir.path()).unwrap();
    assert_eq!(shards.len(), m.shard_paths.len());
    assert_eq!(load_corpus(&shards, 1).unwrap().documents.len(), 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn write_then_read_round_trips(
        texts in prop::collection::vec("[a-zA-Z0-9 \\t\"\\\\é→]{0,24}[a-z]", 0..40),
        shard_size in 1usize..7,
    ) {
        let docs: Vec<_> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| synth::doc(format!("id-{i}"), t.clone()))
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let m = write_corpus(docs.clone(), dir.path(), shard_size, "rt").unwrap();
        prop_assert_eq!(m.doc_count, docs.len());
        prop_assert_eq!(m.shard_paths.len(), docs.len().div_ceil(shard_size));
        prop_assert_eq!(m.total_bytes, docs.iter().map(|d| d.text.len()).sum::<usize>());
        let back: Vec<_> = read_corpus(&m.resolved_shards(dir.path())).map(|r| r.unwrap()).collect();
        prop_assert_eq!(back, docs);
    }
}
