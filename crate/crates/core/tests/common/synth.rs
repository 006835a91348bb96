//! Seeded synthetic corpora.

use std::collections::HashSet;

use dataqual::Document;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn doc(id: impl Into<String>, text: impl Into<String>) -> Document {
    Document::new(id, text, None).expect("non-blank text")
}

fn make_words(r: &mut ChaCha8Rng, consonants: &[u8], vowels: &[u8], count: usize) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut words = Vec::with_capacity(count);
    while words.len() < count {
        let syllables = r.gen_range(1..=3);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push(consonants[r.gen_range(0..consonants.len())] as char);
            w.push(vowels[r.gen_range(0..vowels.len())] as char);
        }
        if seen.insert(w.clone()) {
            words.push(w);
        }
    }
    words
}

/// A first-order word Markov chain with a small successor set per word, so
/// that word order carries most of the predictable structure.
pub struct WordChain {
    words: Vec<String>,
    successors: Vec<Vec<usize>>,
}

impl WordChain {
    pub fn new(seed: u64, vocab: usize, fanout: usize) -> Self {
        let mut r = rng(seed);
        let words = make_words(&mut r, b"bcdfghjklmnprstvz", b"aeiou", vocab);
        let successors = (0..vocab)
            .map(|_| (0..fanout).map(|_| r.gen_range(0..vocab)).collect())
            .collect();
        Self { words, successors }
    }

    pub fn text(&self, r: &mut ChaCha8Rng, n_words: usize) -> String {
        let mut w = r.gen_range(0..self.words.len());
        let mut out = Vec::with_capacity(n_words);
        for _ in 0..n_words {
            out.push(self.words[w].as_str());
            let next = &self.successors[w];
            w = next[r.gen_range(0..next.len())];
        }
        out.join(" ")
    }
}

pub fn shuffle_words(text: &str, r: &mut ChaCha8Rng) -> String {
    let mut words: Vec<&str> = text.split_whitespace().collect();
    words.shuffle(r);
    words.join(" ")
}

/// `count` documents of 30 to 60 words from a fixed chain.
pub fn clean_corpus(chain: &WordChain, seed: u64, count: usize, prefix: &str) -> Vec<Document> {
    let mut r = rng(seed);
    (0..count)
        .map(|i| {
            let n = r.gen_range(30..=60);
            doc(format!("{prefix}{i:06}"), chain.text(&mut r, n))
        })
        .collect()
}

/// Documents drawn from two topics with disjoint letters and tiny
/// vocabularies, interleaved.
pub fn two_cluster_corpus(seed: u64, count: usize) -> Vec<Document> {
    let mut r = rng(seed);
    let topics = [
        make_words(&mut r, b"bcdfg", b"ae", 8),
        make_words(&mut r, b"vwxyz", b"ou", 8),
    ];
    (0..count)
        .map(|i| {
            let vocab = &topics[i % 2];
            let n = r.gen_range(10..=20);
            let text: Vec<&str> = (0..n).map(|_| vocab[r.gen_range(0..vocab.len())].as_str()).collect();
            doc(format!("c{i:06}"), text.join(" "))
        })
        .collect()
}

/// A corpus whose documents use only the given letters, so corpora over
/// disjoint alphabets share no character n-grams.
pub fn alphabet_corpus(seed: u64, count: usize, consonants: &[u8], vowels: &[u8], prefix: &str) -> Vec<Document> {
    let mut r = rng(seed);
    let vocab = make_words(&mut r, consonants, vowels, 40);
    (0..count)
        .map(|i| {
            let n = r.gen_range(8..=16);
            let text: Vec<&str> = (0..n).map(|_| vocab[r.gen_range(0..vocab.len())].as_str()).collect();
            doc(format!("{prefix}{i:06}"), text.join(" "))
        })
        .collect()
}

/// Random printable-ASCII and multi-byte documents for property checks.
pub fn random_docs(seed: u64, count: usize, max_len: usize) -> Vec<Document> {
    const EXTRA: [char; 4] = ['é', 'ß', '→', '中'];
    let mut r = rng(seed);
    (0..count)
        .map(|i| {
            let len = r.gen_range(1..=max_len);
            let mut text: String = (0..len)
                .map(|_| {
                    if r.gen_bool(0.05) {
                        EXTRA[r.gen_range(0..EXTRA.len())]
                    } else {
                        r.gen_range(b' '..=b'~') as char
                    }
                })
                .collect();
            if text.trim().is_empty() {
                text.push('x');
            }
            doc(format!("r{i:05}"), text)
        })
        .collect()
}
