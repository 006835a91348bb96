//! Eigenvalue entropy of cosine-similarity matrices.
//!
//! For unit-norm rows `X` (n x m), `S = X X^T` and the spectrum of `S / n`
//! sums to one. When `m < n` the nonzero spectrum is taken from the m x m
//! Gram matrix `X^T X / n` instead, which has the same nonzero eigenvalues.

use nalgebra::{DMatrix, SymmetricEigen};

use super::DiversityError;

/// Eigenvalues more negative than this are treated as a broken input rather
/// than round-off.
pub const PSD_TOLERANCE: f64 = 1e-8;
const ENTRY_TOLERANCE: f64 = 1e-9;

/// A validated cosine-similarity matrix: symmetric, unit diagonal, entries
/// in [-1, 1].
#[derive(Debug, Clone)]
pub struct SimilarityMatrix(DMatrix<f64>);

impl SimilarityMatrix {
    /// `S = X X^T` for unit-norm rows, symmetrized and with the diagonal
    /// pinned to one so the trace is exactly `n`.
    pub fn from_embeddings(x: &DMatrix<f64>) -> Self {
        let mut s = x * x.transpose();
        let n = s.nrows();
        for i in 0..n {
            s[(i, i)] = 1.0;
            for j in 0..i {
                let v = (0.5 * (s[(i, j)] + s[(j, i)])).clamp(-1.0, 1.0);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        Self(s)
    }

    pub fn from_matrix(s: DMatrix<f64>) -> Result<Self, DiversityError> {
        if !s.is_square() || s.nrows() == 0 {
            return Err(DiversityError::InvalidSimilarity("matrix must be square and non-empty".into()));
        }
        let n = s.nrows();
        for i in 0..n {
            if (s[(i, i)] - 1.0).abs() > ENTRY_TOLERANCE {
                return Err(DiversityError::InvalidSimilarity(format!("diagonal entry {i} is {}", s[(i, i)])));
            }
            for j in 0..n {
                let v = s[(i, j)];
                if !v.is_finite() || v.abs() > 1.0 + ENTRY_TOLERANCE {
                    return Err(DiversityError::InvalidSimilarity(format!("entry ({i}, {j}) is {v}")));
                }
                if (v - s[(j, i)]).abs() > ENTRY_TOLERANCE {
                    return Err(DiversityError::InvalidSimilarity(format!("not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self(s))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    /// Eigenvalues of `S / n`, descending.
    pub fn normalized_spectrum(&self) -> Vec<f64> {
        let n = self.n() as f64;
        sorted_desc(SymmetricEigen::new(&self.0 / n).eigenvalues.iter().copied())
    }
}

/// Eigenvalues of the normalized similarity of the rows of `x`, using the
/// dual Gram matrix whenever `m < n`. The dual path returns only `m` values;
/// the remaining ones are exactly zero.
pub fn embedding_spectrum(x: &DMatrix<f64>) -> Vec<f64> {
    let (n, m) = x.shape();
    if m < n {
        let gram = (x.transpose() * x) / n as f64;
        let sym = 0.5 * (&gram + gram.transpose());
        sorted_desc(SymmetricEigen::new(sym).eigenvalues.iter().copied())
    } else {
        SimilarityMatrix::from_embeddings(x).normalized_spectrum()
    }
}

fn sorted_desc(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// `-sum(l ln l)` over a spectrum that should sum to one. Tiny negative
/// round-off is clamped to zero.
pub fn spectral_entropy(eigenvalues: &[f64]) -> Result<f64, DiversityError> {
    let mut h = 0.0;
    for &l in eigenvalues {
        if !(-PSD_TOLERANCE..=1.0 + PSD_TOLERANCE).contains(&l) {
            return Err(DiversityError::NotPsd(l));
        }
        let l = l.clamp(0.0, 1.0);
        if l > 0.0 {
            h -= l * l.ln();
        }
    }
    Ok(h.max(0.0))
}

/// Semantic diversity `exp(H)` of a validated similarity matrix; lies in
/// [1, n].
pub fn diversity_of_similarity(s: &SimilarityMatrix) -> Result<f64, DiversityError> {
    Ok(spectral_entropy(&s.normalized_spectrum())?.exp())
}

/// Semantic diversity of a set of unit-norm embeddings.
pub fn diversity_of_embeddings(x: &DMatrix<f64>) -> Result<f64, DiversityError> {
    if x.nrows() == 0 {
        return Err(DiversityError::EmptyInput);
    }
    let d = spectral_entropy(&embedding_spectrum(x))?.exp();
    Ok(d.clamp(1.0, x.nrows() as f64))
}
