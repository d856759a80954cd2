//! Embedders behind one async interface: the local hashing embedder and a
//! remote `/embeddings` client whose vectors are re-normalized locally.

use std::time::Duration;

use async_trait::async_trait;
use nyaya_core::embedding::EmbeddingError;
use nyaya_core::{EmbeddingVector, LocalEmbedder};
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use crate::gateway::{error_message, transport_error, GatewayError, DEFAULT_MAX_IN_FLIGHT};
use crate::retry::{retryable_status, with_retries, RetryPolicy};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbedError {
    #[error(transparent)]
    Invalid(#[from] EmbeddingError),
    /// Transport or provider failure; `retryable` reports whether a later
    /// call may succeed.
    #[error("embedding provider failed: {source}")]
    Provider { source: GatewayError, retryable: bool },
}

#[async_trait]
pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;

    async fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError>;

    /// Element `i` is `embed(texts[i])`. Rejects the whole batch before any
    /// work if one text is empty.
    async fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError>;
}

#[async_trait]
impl Embedder for LocalEmbedder {
    fn dimension(&self) -> usize {
        LocalEmbedder::dimension(self)
    }

    async fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        Ok(LocalEmbedder::embed(self, text)?)
    }

    async fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        Ok(LocalEmbedder::embed_batch(self, texts)?)
    }
}

#[derive(Debug, Clone)]
pub struct RemoteEmbedderConfig {
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
    /// Expected vector length; responses of another length are rejected.
    pub dimension: usize,
    pub timeout: Duration,
    pub retry: RetryPolicy,
    pub max_in_flight: usize,
    /// Texts per HTTP request.
    pub batch_size: usize,
}

impl RemoteEmbedderConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>, dimension: usize) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            api_key: None,
            dimension,
            timeout: crate::gateway::DEFAULT_TIMEOUT,
            retry: RetryPolicy::default(),
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
            batch_size: 64,
        }
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct WireResponse {
    data: Vec<WireItem>,
}

#[derive(Deserialize)]
struct WireItem {
    embedding: Vec<f32>,
    #[serde(default)]
    index: Option<usize>,
}

pub struct RemoteEmbedder {
    client: reqwest::Client,
    config: RemoteEmbedderConfig,
    permits: Semaphore,
}

fn provider(source: GatewayError, retryable: bool) -> EmbedError {
    EmbedError::Provider { source, retryable }
}

impl RemoteEmbedder {
    pub fn new(config: RemoteEmbedderConfig) -> Result<Self, EmbedError> {
        let client = reqwest::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| provider(GatewayError::Transport(e.to_string()), false))?;
        let permits = Semaphore::new(config.max_in_flight.max(1));
        Ok(Self { client, config, permits })
    }

    async fn attempt(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, (EmbedError, bool)> {
        let url = format!("{}/embeddings", self.config.base_url.trim_end_matches('/'));
        let mut req = self.client.post(url).json(&WireRequest { model: &self.config.model, input: texts });
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let fail = |(e, r): (GatewayError, bool)| (provider(e, r), r);
        let resp = req.send().await.map_err(|e| fail(transport_error(e, self.config.timeout)))?;
        let status = resp.status().as_u16();
        let body = resp.text().await.map_err(|e| fail(transport_error(e, self.config.timeout)))?;
        if !(200..300).contains(&status) {
            let r = retryable_status(status);
            return Err(fail((GatewayError::Provider { status, message: error_message(&body) }, r)));
        }
        let wire: WireResponse =
            serde_json::from_str(&body).map_err(|e| fail((GatewayError::Malformed(e.to_string()), false)))?;
        if wire.data.len() != texts.len() {
            let msg = format!("expected {} embeddings, got {}", texts.len(), wire.data.len());
            return Err(fail((GatewayError::Malformed(msg), false)));
        }
        let mut items = wire.data;
        if items.iter().all(|i| i.index.is_some()) {
            items.sort_by_key(|i| i.index);
        }
        Ok(items.into_iter().map(|i| i.embedding).collect())
    }

    fn finish(&self, raw: Vec<f32>) -> Result<EmbeddingVector, EmbedError> {
        if raw.len() != self.config.dimension {
            return Err(EmbeddingError::DimensionMismatch { expected: self.config.dimension, actual: raw.len() }.into());
        }
        Ok(EmbeddingVector::normalized(raw)?)
    }
}

#[async_trait]
impl Embedder for RemoteEmbedder {
    fn dimension(&self) -> usize {
        self.config.dimension
    }

    async fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let mut v = self.embed_batch(&[text.to_string()]).await?;
        Ok(v.remove(0))
    }

    async fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        if texts.iter().any(|t| t.trim().is_empty()) {
            return Err(EmbeddingError::EmptyText.into());
        }
        let mut out = Vec::with_capacity(texts.len());
        for batch in texts.chunks(self.config.batch_size.max(1)) {
            let _permit = self
                .permits
                .acquire()
                .await
                .map_err(|e| provider(GatewayError::Transport(e.to_string()), false))?;
            let raw = with_retries(self.config.retry, |_| self.attempt(batch)).await?;
            for v in raw {
                out.push(self.finish(v)?);
            }
        }
        Ok(out)
    }
}
