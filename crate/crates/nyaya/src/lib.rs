//! Runtime around `nyaya-core`: corpus and index files, embedders and LLM
//! gateways, crash-safe session logs, the query engine, the `/v1` HTTP API
//! and the evaluation runner.

pub mod app;
pub mod config;
pub mod embed;
pub mod engine;
pub mod evalrun;
pub mod gateway;
mod retry;
pub mod service;
pub mod session;
pub mod store;

pub use config::{Assets, Config, LlmConfig};
pub use engine::{Engine, EngineError, KnowledgeBase, QueryOutcome, QueryResult};
pub use gateway::{GatewayError, LlmGateway, RemoteGateway, ScriptedGateway};
pub use session::{SessionError, SessionStore};
