//! Chat-completion request/response types and the scripted responder used
//! as a deterministic LLM in tests and offline runs.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChatRole {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self { role: ChatRole::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: ChatRole::Assistant, content: content.into() }
    }
}

pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    /// Which agent is asking (`general`, `research`, ...). Not sent to remote
    /// providers; the scripted responder keys on it.
    pub agent_role: String,
    pub system_prompt: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_output_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RequestError {
    #[error("request has no messages")]
    NoMessages,
    #[error("last message must come from the user")]
    LastNotUser,
    #[error("temperature must be finite and non-negative")]
    BadTemperature,
}

impl ChatRequest {
    pub fn new(agent_role: impl Into<String>, system_prompt: impl Into<String>, messages: Vec<ChatMessage>) -> Self {
        Self {
            agent_role: agent_role.into(),
            system_prompt: system_prompt.into(),
            messages,
            temperature: 0.0,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
        }
    }

    pub fn validate(&self) -> Result<(), RequestError> {
        let last = self.messages.last().ok_or(RequestError::NoMessages)?;
        if last.role != ChatRole::User {
            return Err(RequestError::LastNotUser);
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(RequestError::BadTemperature);
        }
        Ok(())
    }

    pub fn last_user_text(&self) -> &str {
        self.messages.last().map_or("", |m| m.content.as_str())
    }

    /// Whitespace token count of everything sent, as a provider-neutral usage
    /// estimate.
    pub fn input_tokens(&self) -> u32 {
        let n = text::token_count(&self.system_prompt)
            + self.messages.iter().map(|m| text::token_count(&m.content)).sum::<usize>();
        n as u32
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub input_tokens: u32,
    pub output_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub provider_id: String,
    pub usage: Usage,
}

/// Matches any agent role in a script entry.
pub const ANY_ROLE: &str = "*";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub role: String,
    /// Case-insensitive substring of the last user message.
    pub pattern: String,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScriptError {
    #[error("malformed script: {0}")]
    Malformed(String),
    #[error("no script entry for role `{role}` matched and the script has no default")]
    Miss { role: String },
}

/// Ordered `(role, pattern, response)` table; first match wins, otherwise
/// the default response.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Script {
    #[serde(default)]
    pub default: Option<String>,
    #[serde(default)]
    pub entries: Vec<ScriptEntry>,
}

pub const SCRIPTED_PROVIDER_ID: &str = "scripted";

impl Script {
    pub fn from_json(src: &str) -> Result<Self, ScriptError> {
        let s: Script = serde_json::from_str(src).map_err(|e| ScriptError::Malformed(e.to_string()))?;
        if let Some(i) = s.entries.iter().position(|e| e.response.is_empty()) {
            return Err(ScriptError::Malformed(alloc::format!("entry {i} has an empty response")));
        }
        if s.default.as_deref() == Some("") {
            return Err(ScriptError::Malformed("default response is empty".to_string()));
        }
        Ok(s)
    }

    pub fn lookup(&self, request: &ChatRequest) -> Result<&str, ScriptError> {
        let haystack = request.last_user_text().to_lowercase();
        self.entries
            .iter()
            .find(|e| {
                (e.role == ANY_ROLE || e.role == request.agent_role) && text::contains_substring(&haystack, &e.pattern)
            })
            .map(|e| e.response.as_str())
            .or(self.default.as_deref())
            .ok_or_else(|| ScriptError::Miss { role: request.agent_role.clone() })
    }

    pub fn respond(&self, request: &ChatRequest) -> Result<ChatResponse, ScriptError> {
        let content = self.lookup(request)?.to_string();
        Ok(ChatResponse {
            usage: Usage {
                input_tokens: request.input_tokens(),
                output_tokens: text::token_count(&content) as u32,
            },
            content,
            provider_id: SCRIPTED_PROVIDER_ID.to_string(),
        })
    }
}
