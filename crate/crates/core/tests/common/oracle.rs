//! Straight-line reference computations, written without reusing library
//! internals.

use std::collections::{BTreeMap, HashMap};

use dataqual::Document;
use xxhash_rust::xxh3::{xxh3_64, xxh3_64_with_seed};

const PAD: u16 = 256;

/// Counts of (context, next byte) and of contexts, keyed by plain vectors.
pub struct CountOracle {
    pub order: usize,
    pub k: f64,
    pub pairs: HashMap<(Vec<u16>, u8), u64>,
    pub contexts: HashMap<Vec<u16>, u64>,
    pub tokens: u64,
}

fn context_at(bytes: &[u8], t: usize, order: usize) -> Vec<u16> {
    let mut ctx = Vec::with_capacity(order - 1);
    for back in (1..order).rev() {
        ctx.push(if t >= back { bytes[t - back] as u16 } else { PAD });
    }
    ctx
}

impl CountOracle {
    pub fn train(docs: &[Document], order: usize, k: f64) -> Self {
        let mut pairs = HashMap::new();
        let mut contexts = HashMap::new();
        let mut tokens = 0;
        for d in docs {
            let bytes = d.text.as_bytes();
            for t in 0..bytes.len() {
                let ctx = context_at(bytes, t, order);
                *contexts.entry(ctx.clone()).or_insert(0) += 1;
                *pairs.entry((ctx, bytes[t])).or_insert(0) += 1;
                tokens += 1;
            }
        }
        Self { order, k, pairs, contexts, tokens }
    }

    pub fn log2_prob(&self, ctx: &[u16], next: u8) -> f64 {
        let c = *self.pairs.get(&(ctx.to_vec(), next)).unwrap_or(&0) as f64;
        let total = *self.contexts.get(ctx).unwrap_or(&0) as f64;
        ((c + self.k) / (total + 256.0 * self.k)).log2()
    }

    /// Bits per byte token, summed one position at a time.
    pub fn cross_entropy(&self, text: &str) -> f64 {
        let bytes = text.as_bytes();
        let mut sum = 0.0;
        for t in 0..bytes.len() {
            sum -= self.log2_prob(&context_at(bytes, t, self.order), bytes[t]);
        }
        sum / bytes.len() as f64
    }
}

/// Hash, count, project and normalize, one n-gram and one coordinate at a
/// time.
pub fn hashed_embedding(text: &str, dim: usize, seed: u64) -> Vec<f64> {
    let chars: Vec<char> = text.chars().collect();
    let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
    for n in 3..=5 {
        if chars.len() < n {
            continue;
        }
        for start in 0..=chars.len() - n {
            let gram: String = chars[start..start + n].iter().collect();
            let bucket = (xxh3_64(gram.as_bytes()) % (1 << 18)) as u32;
            *counts.entry(bucket).or_default() += 1.0;
        }
    }
    let mut v = vec![0.0; dim];
    for (i, slot) in v.iter_mut().enumerate() {
        for (&bucket, &c) in &counts {
            let mut key = bucket.to_le_bytes().to_vec();
            key.extend_from_slice(&((i / 64) as u64).to_le_bytes());
            let bit = (xxh3_64_with_seed(&key, seed) >> (i % 64)) & 1;
            *slot += if bit == 1 { c } else { -c };
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        if m[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        det *= m[col][col];
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for c in col..n {
                m[row][c] -= f * m[col][c];
            }
        }
    }
    det
}

fn char_poly(a: &[Vec<f64>], lambda: f64) -> f64 {
    let shifted = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, &v)| if i == j { v - lambda } else { v })
                .collect()
        })
        .collect();
    determinant(shifted)
}

/// Real roots of `det(A - lambda I)` for a symmetric matrix: scan the
/// Gershgorin interval for sign changes, then bisect each one. Returns the
/// roots in ascending order.
pub fn symmetric_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let radius = a
        .iter()
        .enumerate()
        .map(|(i, row)| row.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| v.abs()).sum::<f64>())
        .collect::<Vec<_>>();
    let lo = (0..a.len()).map(|i| a[i][i] - radius[i]).fold(f64::INFINITY, f64::min) - 1.0;
    let hi = (0..a.len()).map(|i| a[i][i] + radius[i]).fold(f64::NEG_INFINITY, f64::max) + 1.0;
    let steps = 200_000;
    let mut roots = Vec::new();
    let mut x0 = lo;
    let mut f0 = char_poly(a, x0);
    for s in 1..=steps {
        let x1 = lo + (hi - lo) * s as f64 / steps as f64;
        let f1 = char_poly(a, x1);
        if f0 == 0.0 {
            roots.push(x0);
        } else if f0.signum() != f1.signum() && f1 != 0.0 {
            let (mut l, mut h, mut fl) = (x0, x1, f0);
            for _ in 0..200 {
                let mid = 0.5 * (l + h);
                let fm = char_poly(a, mid);
                if fm == 0.0 {
                    l = mid;
                    h = mid;
                    break;
                }
                if fm.signum() == fl.signum() {
                    l = mid;
                    fl = fm;
                } else {
                    h = mid;
                }
            }
            roots.push(0.5 * (l + h));
        }
        x0 = x1;
        f0 = f1;
    }
    roots
}

/// Keep decision of the nearest-rank percentile gate computed by sorting:
/// the value band runs from the value at rank `ceil(lo n / 100) + 1` to the
/// value at rank `ceil(hi n / 100)`.
pub fn gate_band(values: &[f64], lo_pct: f64, hi_pct: f64) -> (f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = values.len();
    let rank = |p: f64| ((p / 100.0 * n as f64 - 1e-9).ceil() as usize).clamp(0, n);
    let hi_rank = rank(hi_pct).max(1);
    let lo_rank = (rank(lo_pct) + 1).min(hi_rank);
    (sorted[lo_rank - 1], sorted[hi_rank - 1])
}
