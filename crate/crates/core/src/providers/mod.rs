//! Sentence embedding and sentiment providers.

mod file;
mod http;
pub mod sentiment;
mod toy;

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use file::{write_keyed_vectors, write_vector_file, FileProvider, VectorFileHeader, VectorRecord};
pub use http::{HttpProvider, HttpProviderConfig, DEFAULT_BATCH_CAP};
pub use sentiment::{Lexicon, SentimentConfig, SentimentError, SentimentScore};
pub use toy::{toy_embed, ToyProvider, MIN_TOY_DIM};

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("no stored vector for text with sha256 {0}")]
    MissingKey(String),
    #[error("malformed provider data: {0}")]
    Malformed(String),
    #[error("invalid embedding: {0}")]
    InvalidVector(String),
    #[error("empty text at position {0}")]
    EmptyText(usize),
}

/// A finite, non-zero embedding vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self, ProviderError> {
        if values.is_empty() {
            return Err(ProviderError::InvalidVector("zero-length vector".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(ProviderError::InvalidVector(format!("non-finite value at {i}")));
        }
        if values.iter().all(|v| *v == 0.0) {
            return Err(ProviderError::InvalidVector("zero norm".into()));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        dot(&self.0, &self.0).sqrt()
    }

    /// Cosine similarity clamped to [-1, 1]; `None` on a dimension mismatch.
    pub fn cosine(&self, other: &Embedding) -> Option<f64> {
        if self.dim() != other.dim() {
            return None;
        }
        let c = dot(&self.0, &other.0) / (self.norm() * other.norm());
        Some(c.clamp(-1.0, 1.0))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Hex SHA-256 of the UTF-8 text; the key for stored vectors.
pub fn text_key(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    /// One vector per text, in input order.
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding>, ProviderError>;

    /// Per-token vectors, for providers that have a word-level mode.
    fn embed_tokens(&self, _tokens: &[String]) -> Option<Result<Vec<Embedding>, ProviderError>> {
        None
    }
}

pub(crate) fn check_texts(texts: &[String]) -> Result<(), ProviderError> {
    match texts.iter().position(|t| t.is_empty()) {
        Some(i) => Err(ProviderError::EmptyText(i)),
        None => Ok(()),
    }
}

pub(crate) fn check_dims(vectors: &[Embedding], dim: usize) -> Result<(), ProviderError> {
    match vectors.iter().find(|v| v.dim() != dim) {
        Some(v) => Err(ProviderError::Malformed(format!(
            "vector of length {} from a provider of dimension {dim}",
            v.dim()
        ))),
        None => Ok(()),
    }
}
