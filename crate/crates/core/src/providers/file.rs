//! Precomputed vectors stored as line-delimited JSON.
//!
//! The first line is a header `{"dim": n, "provider_name": "..."}`; every
//! following line is `{"text_sha256": "<hex>", "vector": [..]}`.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_texts, text_key, Embedding, EmbeddingProvider, ProviderError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorFileHeader {
    pub dim: usize,
    pub provider_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorRecord {
    pub text_sha256: String,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FileProvider {
    name: String,
    dim: usize,
    vectors: HashMap<String, Embedding>,
}

impl FileProvider {
    pub fn open(path: &Path) -> Result<Self, ProviderError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ProviderError::Unavailable(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ProviderError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines
            .next()
            .ok_or_else(|| ProviderError::Malformed("empty vector file".into()))?;
        let header: VectorFileHeader = serde_json::from_str(first)
            .map_err(|e| ProviderError::Malformed(format!("line 1: bad header: {e}")))?;
        if header.dim == 0 {
            return Err(ProviderError::Malformed("line 1: dim must be positive".into()));
        }
        let mut vectors = HashMap::new();
        for (i, line) in lines {
            let record: VectorRecord = serde_json::from_str(line)
                .map_err(|e| ProviderError::Malformed(format!("line {}: {e}", i + 1)))?;
            if record.vector.len() != header.dim {
                return Err(ProviderError::Malformed(format!(
                    "line {}: vector length {} != dim {}",
                    i + 1,
                    record.vector.len(),
                    header.dim
                )));
            }
            let v = Embedding::new(record.vector)
                .map_err(|e| ProviderError::Malformed(format!("line {}: {e}", i + 1)))?;
            vectors.insert(record.text_sha256.to_lowercase(), v);
        }
        Ok(Self { name: header.provider_name, dim: header.dim, vectors })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Looks up a vector by the SHA-256 hex of its text.
    pub fn get(&self, text_sha256: &str) -> Option<&Embedding> {
        self.vectors.get(text_sha256)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &Embedding)> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v))
    }
}

impl EmbeddingProvider for FileProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding>, ProviderError> {
        check_texts(texts)?;
        texts
            .iter()
            .map(|t| {
                let key = text_key(t);
                self.vectors.get(&key).cloned().ok_or(ProviderError::MissingKey(key))
            })
            .collect()
    }
}

/// Writes a vector file; duplicate texts are stored once, order is by key.
pub fn write_vector_file(
    path: &Path,
    provider_name: &str,
    dim: usize,
    entries: &[(String, Embedding)],
) -> std::io::Result<()> {
    let keyed: BTreeMap<String, &Embedding> = entries.iter().map(|(t, v)| (text_key(t), v)).collect();
    let mut out = BufWriter::new(fs::File::create(path)?);
    write_keyed_vectors(&mut out, provider_name, dim, keyed)?;
    out.flush()
}

/// Same format as [`write_vector_file`] for vectors already keyed by text hash.
pub fn write_keyed_vectors<'a, W, I>(mut out: W, provider_name: &str, dim: usize, keyed: I) -> std::io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = (String, &'a Embedding)>,
{
    let header = VectorFileHeader { dim, provider_name: provider_name.to_string() };
    writeln!(out, "{}", serde_json::to_string(&header)?)?;
    for (key, v) in keyed {
        let record = VectorRecord { text_sha256: key, vector: v.values().to_vec() };
        writeln!(out, "{}", serde_json::to_string(&record)?)?;
    }
    Ok(())
}
