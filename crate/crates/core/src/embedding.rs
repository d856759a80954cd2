//! Unit-norm embedding vectors and the deterministic local embedder.
//!
//! The local embedder is a hashed bag of words: every content token is
//! lowercased, stripped of edge punctuation, hashed with seeded FNV-1a
//! (64-bit) and counted in bucket `hash % dimension`; the count vector is
//! then L2-normalized. A short fixed list of English function words is
//! skipped so that they do not dominate similarity between legal texts; a
//! text made only of such words falls back to hashing all of its tokens.

use alloc::vec;
use alloc::vec::Vec;

use serde::Serialize;

use crate::text;

pub const DEFAULT_DIMENSION: usize = 256;
pub const DEFAULT_SEED: u64 = 0x6e79_6179_6100_0001;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Tolerance on the unit-norm contract.
pub const NORM_TOLERANCE: f64 = 1e-6;

#[rustfmt::skip]
const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "by", "can", "do", "does", "for", "from",
    "has", "have", "how", "i", "in", "is", "it", "its", "me", "my", "of", "on", "or",
    "that", "the", "their", "this", "to", "under", "was", "what", "when", "which", "who",
    "will", "with", "you", "your",
];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbeddingError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("embedding dimension must be positive")]
    ZeroDimension,
    #[error("vector has zero norm")]
    ZeroNorm,
    #[error("vector component {0} is not finite")]
    NonFinite(usize),
    #[error("expected dimension {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
}

/// A finite vector with Euclidean norm 1 (within [`NORM_TOLERANCE`]).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    /// L2-normalize `values`. Rejects empty, non-finite or all-zero input.
    pub fn normalized(values: Vec<f32>) -> Result<Self, EmbeddingError> {
        Self::normalized_f64(values.iter().map(|&v| v as f64).collect())
    }

    pub fn normalized_f64(values: Vec<f64>) -> Result<Self, EmbeddingError> {
        if values.is_empty() {
            return Err(EmbeddingError::ZeroDimension);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite(i));
        }
        let norm = libm::sqrt(values.iter().map(|v| v * v).sum::<f64>());
        if norm == 0.0 || !norm.is_finite() {
            return Err(EmbeddingError::ZeroNorm);
        }
        Ok(Self(values.iter().map(|v| (v / norm) as f32).collect()))
    }

    /// Wrap components that are already unit-norm, e.g. read back from an
    /// index file. Only finiteness is checked.
    pub fn from_unit_components(values: Vec<f32>) -> Result<Self, EmbeddingError> {
        if values.is_empty() {
            return Err(EmbeddingError::ZeroDimension);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite(i));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.0.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>())
    }

    /// Dot product accumulated in f64; equals cosine similarity for unit
    /// vectors.
    pub fn dot(&self, other: &Self) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.0
    }
}

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        acc += (*x as f64) * (*y as f64);
    }
    acc
}

/// Seeded FNV-1a over the little-endian seed bytes followed by `bytes`.
pub fn fnv1a64(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for b in seed.to_le_bytes().iter().chain(bytes) {
        h ^= *b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.binary_search(&token).is_ok()
}

/// Hashed bag-of-words embedder. Stateless and deterministic across
/// platforms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalEmbedder {
    dimension: usize,
    seed: u64,
}

impl Default for LocalEmbedder {
    fn default() -> Self {
        Self { dimension: DEFAULT_DIMENSION, seed: DEFAULT_SEED }
    }
}

impl LocalEmbedder {
    pub fn new(dimension: usize) -> Result<Self, EmbeddingError> {
        Self::with_seed(dimension, DEFAULT_SEED)
    }

    pub fn with_seed(dimension: usize, seed: u64) -> Result<Self, EmbeddingError> {
        if dimension == 0 {
            return Err(EmbeddingError::ZeroDimension);
        }
        Ok(Self { dimension, seed })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn bucket(&self, token: &str) -> usize {
        (fnv1a64(self.seed, token.as_bytes()) % self.dimension as u64) as usize
    }

    pub fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        let normalized: Vec<_> = text::tokens(text).map(text::normalize_token).collect();
        if normalized.is_empty() {
            return Err(EmbeddingError::EmptyText);
        }
        let mut counts = vec![0.0f64; self.dimension];
        let mut content = 0usize;
        for tok in normalized.iter().filter(|t| !is_stopword(t)) {
            counts[self.bucket(tok)] += 1.0;
            content += 1;
        }
        if content == 0 {
            for tok in &normalized {
                counts[self.bucket(tok)] += 1.0;
            }
        }
        EmbeddingVector::normalized_f64(counts)
    }

    /// Embed every text; fails before doing any work if one is empty.
    pub fn embed_batch<S: AsRef<str>>(&self, texts: &[S]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        if texts.iter().any(|t| t.as_ref().trim().is_empty()) {
            return Err(EmbeddingError::EmptyText);
        }
        texts.iter().map(|t| self.embed(t.as_ref())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::string::String;
    use proptest::prelude::*;

    #[test]
    fn stopwords_sorted_for_binary_search() {
        assert!(STOPWORDS.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn fnv_reference_values() {
        // FNV-1a 64 of "a" with an all-zero seed prefix, computed by hand
        // from the published offset basis and prime.
        let mut h = FNV_OFFSET;
        for b in [0u8; 8].iter().chain(b"a") {
            h ^= *b as u64;
            h = h.wrapping_mul(FNV_PRIME);
        }
        assert_eq!(fnv1a64(0, b"a"), h);
        assert_ne!(fnv1a64(1, b"a"), fnv1a64(0, b"a"));
    }

    #[test]
    fn deterministic_and_unit_norm() {
        let e = LocalEmbedder::default();
        let a = e.embed("Punishment for theft under Section 379").unwrap();
        let b = e.embed("Punishment for theft under Section 379").unwrap();
        assert_eq!(a, b);
        assert!((a.norm() - 1.0).abs() < NORM_TOLERANCE);
        assert_eq!(a.dimension(), DEFAULT_DIMENSION);
    }

    #[test]
    fn repetition_collapses() {
        let e = LocalEmbedder::default();
        assert_eq!(e.embed("theft theft").unwrap(), e.embed("theft").unwrap());
    }

    #[test]
    fn empty_text_rejected() {
        let e = LocalEmbedder::default();
        assert_eq!(e.embed(""), Err(EmbeddingError::EmptyText));
        assert_eq!(e.embed(" \n\t"), Err(EmbeddingError::EmptyText));
    }

    #[test]
    fn all_stopwords_still_embeds() {
        let e = LocalEmbedder::default();
        let v = e.embed("what is the").unwrap();
        assert!((v.norm() - 1.0).abs() < NORM_TOLERANCE);
    }

    #[test]
    fn batch_matches_pointwise() {
        let e = LocalEmbedder::default();
        assert!(e.embed_batch::<&str>(&[]).unwrap().is_empty());
        let batch = e.embed_batch(&["a", "b"]).unwrap();
        assert_eq!(batch, [e.embed("a").unwrap(), e.embed("b").unwrap()]);
        assert_eq!(e.embed_batch(&["a", "", "c"]), Err(EmbeddingError::EmptyText));
    }

    #[test]
    fn normalization_rejects_bad_input() {
        assert_eq!(EmbeddingVector::normalized(vec![0.0, 0.0]), Err(EmbeddingError::ZeroNorm));
        assert_eq!(EmbeddingVector::normalized(vec![1.0, f32::NAN]), Err(EmbeddingError::NonFinite(1)));
        assert_eq!(EmbeddingVector::normalized(Vec::new()), Err(EmbeddingError::ZeroDimension));
        assert!(LocalEmbedder::new(0).is_err());
    }

    proptest! {
        #[test]
        fn single_token_scale_invariance(word in "[a-z]{1,12}", k in 1usize..20) {
            let e = LocalEmbedder::default();
            let repeated: String = (0..k).map(|_| format!("{word} ")).collect();
            prop_assert_eq!(e.embed(&repeated).unwrap(), e.embed(&word).unwrap());
        }

        #[test]
        fn any_text_is_unit_norm(words in proptest::collection::vec("[A-Za-z0-9.,]{1,10}", 1..40)) {
            let e = LocalEmbedder::new(64).unwrap();
            let v = e.embed(&words.join(" ")).unwrap();
            prop_assert!((v.norm() - 1.0).abs() < NORM_TOLERANCE);
            prop_assert!(v.as_slice().iter().all(|x| x.is_finite()));
        }
    }
}
