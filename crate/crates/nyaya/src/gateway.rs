//! Chat-completion gateways: a deterministic scripted provider and a remote
//! OpenAI-compatible `/chat/completions` client.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use nyaya_core::chat::{ChatRole, ScriptError};
use nyaya_core::{ChatRequest, ChatResponse, Script, Usage};
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

pub use crate::retry::RetryPolicy;
use crate::retry::{retryable_status, with_retries};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GatewayError {
    #[error("invalid chat request: {0}")]
    InvalidRequest(String),
    #[error("provider timed out after {0:?}")]
    Timeout(Duration),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("provider returned HTTP {status}: {message}")]
    Provider { status: u16, message: String },
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("provider returned empty content")]
    EmptyContent,
    #[error("no script entry for role `{0}` and no default")]
    ScriptMiss(String),
}

#[async_trait]
pub trait LlmGateway: Send + Sync {
    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError>;
}

/// Looks answers up in a [`Script`]. A pure function of (script, request).
#[derive(Debug)]
pub struct ScriptedGateway {
    script: Script,
    calls: AtomicUsize,
}

impl ScriptedGateway {
    pub fn new(script: Script) -> Self {
        Self { script, calls: AtomicUsize::new(0) }
    }

    pub fn from_json(src: &str) -> Result<Self, ScriptError> {
        Script::from_json(src).map(Self::new)
    }

    /// Number of `complete` calls so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

#[async_trait]
impl LlmGateway for ScriptedGateway {
    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        request.validate().map_err(|e| GatewayError::InvalidRequest(e.to_string()))?;
        self.script.respond(request).map_err(|e| match e {
            ScriptError::Miss { role } => GatewayError::ScriptMiss(role),
            other => GatewayError::Malformed(other.to_string()),
        })
    }
}

#[async_trait]
impl<G: LlmGateway + ?Sized> LlmGateway for Arc<G> {
    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        (**self).complete(request).await
    }
}

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    /// Base URL up to and including the API version, e.g. `http://host:8000/v1`.
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub retry: RetryPolicy,
    pub max_in_flight: usize,
}

impl RemoteConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            api_key: None,
            timeout: DEFAULT_TIMEOUT,
            retry: RetryPolicy::default(),
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
        }
    }
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: Vec<WireMessage<'a>>,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireContent,
}

#[derive(Deserialize)]
struct WireContent {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u32,
    #[serde(default)]
    completion_tokens: u32,
}

/// Pull a readable message out of an error body.
pub(crate) fn error_message(body: &str) -> String {
    #[derive(Deserialize)]
    struct Outer {
        error: Inner,
    }
    #[derive(Deserialize)]
    struct Inner {
        message: String,
    }
    match serde_json::from_str::<Outer>(body) {
        Ok(o) => o.error.message,
        Err(_) => body.chars().take(500).collect(),
    }
}

/// Map a send failure to (error, retryable).
pub(crate) fn transport_error(e: reqwest::Error, timeout: Duration) -> (GatewayError, bool) {
    if e.is_timeout() {
        (GatewayError::Timeout(timeout), true)
    } else {
        (GatewayError::Transport(e.to_string()), true)
    }
}

pub struct RemoteGateway {
    client: reqwest::Client,
    config: RemoteConfig,
    permits: Semaphore,
}

impl RemoteGateway {
    pub fn new(config: RemoteConfig) -> Result<Self, GatewayError> {
        let client = reqwest::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        let permits = Semaphore::new(config.max_in_flight.max(1));
        Ok(Self { client, config, permits })
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    async fn attempt(&self, body: &WireRequest<'_>) -> Result<ChatResponse, (GatewayError, bool)> {
        let mut req = self.client.post(self.url()).json(body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().await.map_err(|e| transport_error(e, self.config.timeout))?;
        let status = resp.status().as_u16();
        let text = resp.text().await.map_err(|e| transport_error(e, self.config.timeout))?;
        if !(200..300).contains(&status) {
            return Err((GatewayError::Provider { status, message: error_message(&text) }, retryable_status(status)));
        }
        let wire: WireResponse =
            serde_json::from_str(&text).map_err(|e| (GatewayError::Malformed(e.to_string()), false))?;
        let content = wire
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .filter(|c| !c.trim().is_empty())
            .ok_or((GatewayError::EmptyContent, false))?;
        let usage = wire.usage.map_or(Usage::default(), |u| Usage {
            input_tokens: u.prompt_tokens,
            output_tokens: u.completion_tokens,
        });
        Ok(ChatResponse { content, provider_id: format!("remote:{}", self.config.model), usage })
    }
}

#[async_trait]
impl LlmGateway for RemoteGateway {
    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        request.validate().map_err(|e| GatewayError::InvalidRequest(e.to_string()))?;
        let mut messages = vec![WireMessage { role: "system", content: &request.system_prompt }];
        messages.extend(request.messages.iter().map(|m| WireMessage {
            role: match m.role {
                ChatRole::User => "user",
                ChatRole::Assistant => "assistant",
            },
            content: &m.content,
        }));
        let body = WireRequest {
            model: &self.config.model,
            messages,
            temperature: request.temperature,
            max_tokens: request.max_output_tokens,
        };
        let _permit = self.permits.acquire().await.map_err(|e| GatewayError::Transport(e.to_string()))?;
        with_retries(self.config.retry, |_| self.attempt(&body)).await
    }
}
