use sha2::{Digest, Sha256};

use super::{check_texts, Embedding, EmbeddingProvider, ProviderError};

pub const MIN_TOY_DIM: usize = 8;

/// Deterministic hashed character-trigram embedder.
///
/// Each trigram of the lowercased, space-padded text is hashed (SHA-256 of
/// the seed and trigram); the hash picks a bucket (`hash % dim`) and a sign
/// (hash parity). Bucket counts are L2-normalized. It captures surface
/// overlap only and exists so the pipeline runs without a real encoder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToyProvider {
    name: String,
    dim: usize,
    seed: u64,
}

impl ToyProvider {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim >= MIN_TOY_DIM, "toy embedder needs dim >= {MIN_TOY_DIM}");
        Self { name: format!("toy:{dim},{seed}"), dim, seed }
    }
}

impl EmbeddingProvider for ToyProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding>, ProviderError> {
        check_texts(texts)?;
        Ok(texts.iter().map(|t| toy_embed(t, self.dim, self.seed)).collect())
    }

    fn embed_tokens(&self, tokens: &[String]) -> Option<Result<Vec<Embedding>, ProviderError>> {
        Some(self.embed_batch(tokens))
    }
}

fn trigram_hash(seed: u64, gram: &[char]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for c in gram {
        let mut buf = [0u8; 4];
        h.update(c.encode_utf8(&mut buf).as_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

pub fn toy_embed(text: &str, dim: usize, seed: u64) -> Embedding {
    assert!(dim >= MIN_TOY_DIM, "toy embedder needs dim >= {MIN_TOY_DIM}");
    let padded: Vec<char> = std::iter::once(' ')
        .chain(text.to_lowercase().chars())
        .chain(std::iter::once(' '))
        .collect();
    let mut values = vec![0.0f64; dim];
    let mut first_bucket = None;
    for gram in padded.windows(3) {
        let h = trigram_hash(seed, gram);
        let bucket = (h % dim as u64) as usize;
        first_bucket.get_or_insert(bucket);
        values[bucket] += if h % 2 == 0 { 1.0 } else { -1.0 };
    }
    // Opposite-signed collisions can only cancel for odd dims.
    if values.iter().all(|v| *v == 0.0) {
        values[first_bucket.unwrap_or(0)] = 1.0;
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    values.iter_mut().for_each(|v| *v /= norm);
    Embedding::new(values).expect("normalized non-zero vector")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos(a: &str, b: &str) -> f64 {
        toy_embed(a, 64, 0).cosine(&toy_embed(b, 64, 0)).unwrap()
    }

    #[test]
    fn deterministic() {
        assert_eq!(toy_embed("abc", 16, 0), toy_embed("abc", 16, 0));
        assert_ne!(toy_embed("abc", 16, 0), toy_embed("abc", 16, 1));
    }

    #[test]
    fn self_cosine_is_one() {
        assert!((cos("the cat sat", "the cat sat") - 1.0).abs() < 1e-9);
    }

    #[test]
    fn shared_trigrams_rank_higher() {
        let near = cos("the cat sat", "the cat sat down");
        let far = cos("the cat sat", "stock market crash");
        assert!(far < near, "far={far} near={near}");
    }

    #[test]
    fn unit_norm_and_short_text() {
        for t in ["a", "ab", "Hello, World!"] {
            assert!((toy_embed(t, 9, 3).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn case_insensitive() {
        assert_eq!(toy_embed("The Cat", 32, 0), toy_embed("the cat", 32, 0));
    }
}
