//! Deterministic text embeddings and vector utilities.
//!
//! The encoder is a feature-hashed bag of tokens with sublinear term
//! weighting. It stands in for a pretrained language model: no external
//! weights, bit-identical output across runs and platforms.

use thiserror::Error;

/// Default embedding dimension of the text encoder.
pub const DEFAULT_DIM: usize = 256;

/// Seed constant for the 64-bit FNV-1a feature hash. Changing it changes
/// every embedding, so it is part of the on-disk model compatibility story.
pub const HASH_SEED: u64 = 0xcbf2_9ce4_8422_2325;

const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over `bytes`, folded onto a caller-supplied seed.
///
/// Shared by the text encoder and the recommender's hashed vocabulary so
/// that both sides agree on token identity.
pub fn hash64(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = seed;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

#[derive(Debug, Error, PartialEq)]
pub enum VectorError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("cannot pool an empty vector sequence")]
    EmptyPool,
}

/// Splits text into alphanumeric runs; punctuation and whitespace are
/// discarded. Deterministic by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tokenizer {
    pub lowercase: bool,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Self { lowercase: true }
    }
}

impl Tokenizer {
    /// Tokenizer that keeps the original surface form of each token.
    pub fn surface() -> Self {
        Self { lowercase: false }
    }

    pub fn tokens(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut current = String::new();
        for ch in text.chars() {
            if ch.is_alphanumeric() {
                if self.lowercase {
                    current.extend(ch.to_lowercase());
                } else {
                    current.push(ch);
                }
            } else if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
        }
        if !current.is_empty() {
            out.push(current);
        }
        out
    }

    pub fn count(&self, text: &str) -> usize {
        self.tokens(text).len()
    }
}

/// Fixed-dimension real vector produced by the text or user encoders.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self { values }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { values: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// True for the all-zero vector (the encoding of empty text).
    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// L2-normalizes in place; the zero vector is left untouched.
    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            for v in &mut self.values {
                *v /= n;
            }
        }
    }
}

/// Deterministic text encoder: hashed bag of tokens, weight `1 + ln(tf)`,
/// sign hash, then L2 normalization. Empty text maps to the zero vector.
#[derive(Debug, Clone)]
pub struct TextEncoder {
    pub dim: usize,
    pub tokenizer: Tokenizer,
}

impl Default for TextEncoder {
    fn default() -> Self {
        Self { dim: DEFAULT_DIM, tokenizer: Tokenizer::default() }
    }
}

impl TextEncoder {
    pub fn new(dim: usize) -> Self {
        Self { dim, tokenizer: Tokenizer::default() }
    }

    pub fn encode(&self, text: &str) -> EmbeddingVector {
        encode_text(text, self.dim, &self.tokenizer)
    }
}

/// Encodes `text` into a `dim`-dimensional hashed bag-of-tokens vector.
pub fn encode_text(text: &str, dim: usize, tokenizer: &Tokenizer) -> EmbeddingVector {
    assert!(dim > 0, "embedding dimension must be positive");
    let tokens = tokenizer.tokens(text);
    if tokens.is_empty() {
        return EmbeddingVector::zeros(dim);
    }
    let mut tf: std::collections::BTreeMap<String, usize> = std::collections::BTreeMap::new();
    for t in tokens {
        *tf.entry(t).or_insert(0) += 1;
    }
    let mut values = vec![0.0; dim];
    for (token, count) in tf {
        let h = hash64(HASH_SEED, token.as_bytes());
        let bucket = (h % dim as u64) as usize;
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        values[bucket] += sign * (1.0 + (count as f64).ln());
    }
    let mut v = EmbeddingVector::new(values);
    v.normalize();
    v
}

/// Element-wise mean of the inputs, then L2 normalization.
pub fn pool(vectors: &[EmbeddingVector]) -> Result<EmbeddingVector, VectorError> {
    let first = vectors.first().ok_or(VectorError::EmptyPool)?;
    let dim = first.dim();
    let mut acc = vec![0.0; dim];
    for v in vectors {
        if v.dim() != dim {
            return Err(VectorError::DimensionMismatch(dim, v.dim()));
        }
        for (a, x) in acc.iter_mut().zip(v.as_slice()) {
            *a += x;
        }
    }
    let n = vectors.len() as f64;
    for a in &mut acc {
        *a /= n;
    }
    let mut v = EmbeddingVector::new(acc);
    v.normalize();
    Ok(v)
}

/// Euclidean distance. On unit vectors this ranks pairs exactly like
/// `1 - cosine`, so either view of closeness gives the same ordering.
pub fn distance(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, VectorError> {
    if a.dim() != b.dim() {
        return Err(VectorError::DimensionMismatch(a.dim(), b.dim()));
    }
    let sum: f64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum.sqrt())
}

/// Cosine similarity; zero whenever either input is the zero vector.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, VectorError> {
    if a.dim() != b.dim() {
        return Err(VectorError::DimensionMismatch(a.dim(), b.dim()));
    }
    if a.is_zero() || b.is_zero() {
        return Ok(0.0);
    }
    let dot: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum();
    Ok(dot / (a.norm() * b.norm()))
}
