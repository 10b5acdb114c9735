use std::time::Duration;

use serde::{Deserialize, Serialize};
use ureq::Agent;

use super::{check_dims, check_texts, Embedding, EmbeddingProvider, ProviderError};

/// Largest batch the embedding sidecar accepts by default.
pub const DEFAULT_BATCH_CAP: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct HttpProviderConfig {
    pub base_url: String,
    pub timeout: Duration,
    pub batch_cap: usize,
}

impl HttpProviderConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            timeout: Duration::from_secs(60),
            batch_cap: DEFAULT_BATCH_CAP,
        }
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
    dim: usize,
}

#[derive(Deserialize)]
struct HealthResponse {
    #[serde(default)]
    model: Option<String>,
    dim: usize,
}

/// Client for a sidecar serving `POST /embed` and `GET /health`.
///
/// The dimension and model name are read from `/health` on connect. Large
/// batches are split to respect the sidecar's batch cap.
#[derive(Debug)]
pub struct HttpProvider {
    config: HttpProviderConfig,
    agent: Agent,
    name: String,
    dim: usize,
}

impl HttpProvider {
    pub fn connect(config: HttpProviderConfig) -> Result<Self, ProviderError> {
        if config.batch_cap == 0 {
            return Err(ProviderError::Unavailable("batch cap must be positive".into()));
        }
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .build()
            .into();
        let url = format!("{}/health", config.base_url.trim_end_matches('/'));
        let health: HealthResponse = agent
            .get(&url)
            .call()
            .map_err(|e| ProviderError::Unavailable(format!("GET {url}: {e}")))?
            .body_mut()
            .read_json()
            .map_err(|e| ProviderError::Malformed(format!("GET {url}: {e}")))?;
        if health.dim == 0 {
            return Err(ProviderError::Malformed("sidecar reported dim 0".into()));
        }
        let name = format!("http:{}", health.model.unwrap_or_else(|| "unknown".into()));
        Ok(Self { config, agent, name, dim: health.dim })
    }

    fn embed_chunk(&self, texts: &[String]) -> Result<Vec<Embedding>, ProviderError> {
        let url = format!("{}/embed", self.config.base_url.trim_end_matches('/'));
        let response: EmbedResponse = self
            .agent
            .post(&url)
            .send_json(EmbedRequest { texts })
            .map_err(|e| ProviderError::Unavailable(format!("POST {url}: {e}")))?
            .body_mut()
            .read_json()
            .map_err(|e| ProviderError::Malformed(format!("POST {url}: {e}")))?;
        if response.vectors.len() != texts.len() {
            return Err(ProviderError::Malformed(format!(
                "{} vectors for {} texts",
                response.vectors.len(),
                texts.len()
            )));
        }
        if response.dim != self.dim {
            return Err(ProviderError::Malformed(format!(
                "response dim {} differs from health dim {}",
                response.dim, self.dim
            )));
        }
        let vectors = response
            .vectors
            .into_iter()
            .map(Embedding::new)
            .collect::<Result<Vec<_>, _>>()?;
        check_dims(&vectors, self.dim)?;
        Ok(vectors)
    }
}

impl EmbeddingProvider for HttpProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding>, ProviderError> {
        check_texts(texts)?;
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.config.batch_cap) {
            out.extend(self.embed_chunk(chunk)?);
        }
        Ok(out)
    }
}
