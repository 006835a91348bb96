//! Seed plumbing. Every stochastic step draws from a ChaCha stream whose seed
//! is derived from one run seed plus a label, so pipelines replay exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use xxhash_rust::xxh3::xxh3_64_with_seed;

pub type StreamRng = ChaCha8Rng;

/// Derives an independent child seed for a named subsystem.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    xxh3_64_with_seed(label.as_bytes(), seed)
}

/// Derives a child seed indexed by an integer (repeat number, trial, ...).
pub fn derive_indexed(seed: u64, label: &str, index: u64) -> u64 {
    let mut buf = Vec::with_capacity(label.len() + 8);
    buf.extend_from_slice(label.as_bytes());
    buf.extend_from_slice(&index.to_le_bytes());
    xxh3_64_with_seed(&buf, seed)
}

pub fn stream(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform draw in the half-open interval (0, 1].
pub fn unit_open_closed<R: rand::Rng>(rng: &mut R) -> f64 {
    1.0 - rng.gen::<f64>()
}

/// Uniform draw in the open interval (0, 1).
pub fn unit_open<R: rand::Rng>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return u;
        }
    }
}

/// Standard Gumbel draw, `-ln(-ln u)`.
pub fn gumbel<R: rand::Rng>(rng: &mut R) -> f64 {
    -(-unit_open(rng).ln()).ln()
}
