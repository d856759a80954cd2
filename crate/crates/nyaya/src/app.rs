//! Wiring from [`Config`] to a running [`Engine`].

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use nyaya_core::{Corpus, LocalEmbedder};

use crate::config::{builtin_script, Assets, Config, EmbedderConfig, LlmConfig, BUILTIN_SAMPLE_CORPUS};
use crate::embed::{Embedder, RemoteEmbedder, RemoteEmbedderConfig};
use crate::engine::{Engine, EngineParams};
use crate::gateway::{LlmGateway, RemoteConfig, RemoteGateway, ScriptedGateway};
use crate::session::SessionStore;
use crate::store;

/// File under the data directory that accumulates ingested documents.
pub const INGESTED_CORPUS: &str = "corpus.jsonl";

pub fn sessions_dir(data_dir: &Path) -> PathBuf {
    data_dir.join("sessions")
}

pub fn ingest_log(data_dir: &Path) -> PathBuf {
    data_dir.join(INGESTED_CORPUS)
}

/// Seed corpus (configured file or the built-in sample) followed by any
/// previously ingested documents. Bad lines are logged and skipped.
pub fn load_corpus(config: &Config) -> Result<Corpus> {
    let now = store::now_millis();
    let mut corpus = Corpus::new();
    let seed = match &config.corpus_path {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading corpus {}", p.display()))?,
        None => BUILTIN_SAMPLE_CORPUS.to_string(),
    };
    let report = corpus.ingest_lines(seed.lines(), now);
    for e in &report.errors {
        tracing::warn!("seed corpus: {e}");
    }
    let log = ingest_log(&config.data_dir);
    if log.exists() {
        let text = std::fs::read_to_string(&log).with_context(|| format!("reading {}", log.display()))?;
        for e in corpus.ingest_lines(text.lines(), now).errors {
            tracing::warn!("{}: {e}", log.display());
        }
    }
    Ok(corpus)
}

pub fn embedder(config: &EmbedderConfig) -> Result<Arc<dyn Embedder>> {
    Ok(match config {
        EmbedderConfig::Local { dimension } => Arc::new(LocalEmbedder::new(*dimension)?),
        EmbedderConfig::Remote { base_url, model, api_key, dimension, timeout } => {
            let mut c = RemoteEmbedderConfig::new(base_url.clone(), model.clone(), *dimension);
            c.api_key = api_key.clone();
            c.timeout = *timeout;
            Arc::new(RemoteEmbedder::new(c)?)
        }
    })
}

pub fn gateway(config: &LlmConfig) -> Result<Arc<dyn LlmGateway>> {
    Ok(match config {
        LlmConfig::Scripted { script_path } => {
            let src = match script_path {
                Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading script {}", p.display()))?,
                None => builtin_script().to_string(),
            };
            Arc::new(ScriptedGateway::from_json(&src)?)
        }
        LlmConfig::Remote { base_url, model, api_key, timeout } => {
            let mut c = RemoteConfig::new(base_url.clone(), model.clone());
            c.api_key = api_key.clone();
            c.timeout = *timeout;
            Arc::new(RemoteGateway::new(c)?)
        }
    })
}

pub async fn build_engine(config: &Config) -> Result<Engine> {
    let assets = Assets::load(config.config_dir.as_deref(), config.rules_path.as_deref())?;
    let sessions = SessionStore::open(sessions_dir(&config.data_dir))
        .with_context(|| format!("opening data directory {}", config.data_dir.display()))?;
    let corpus = load_corpus(config)?;
    let engine = Engine::new(
        corpus,
        assets,
        embedder(&config.embedder)?,
        gateway(&config.llm)?,
        sessions,
        EngineParams::default(),
        Some(ingest_log(&config.data_dir)),
    )
    .await?;
    Ok(engine)
}
