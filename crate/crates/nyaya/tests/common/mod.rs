#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use nyaya::config::{builtin_script, BUILTIN_SAMPLE_CORPUS};
use nyaya::embed::Embedder;
use nyaya::engine::EngineParams;
use nyaya::{Assets, Engine, LlmGateway, ScriptedGateway, SessionStore};
use nyaya_core::{Corpus, LocalEmbedder};

/// Fixed ingestion time so runs are reproducible.
pub const INGESTED_AT: i64 = 1_700_000_000_000;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap_or_else(|e| panic!("reading fixture {name}: {e}"))
}

pub fn sample_corpus() -> Corpus {
    let mut corpus = Corpus::new();
    let report = corpus.ingest_lines(BUILTIN_SAMPLE_CORPUS.lines(), INGESTED_AT);
    assert!(report.errors.is_empty(), "{:?}", report.errors);
    corpus
}

pub fn scripted(script_json: &str) -> Arc<ScriptedGateway> {
    Arc::new(ScriptedGateway::from_json(script_json).expect("script parses"))
}

pub fn builtin_gateway() -> Arc<ScriptedGateway> {
    scripted(builtin_script())
}

pub async fn engine_with(
    data_dir: &Path,
    embedder: Arc<dyn Embedder>,
    gateway: Arc<dyn LlmGateway>,
) -> Engine {
    let sessions = SessionStore::open(data_dir.join("sessions")).expect("session dir");
    Engine::new(sample_corpus(), Assets::builtin(), embedder, gateway, sessions, EngineParams::default(), None)
        .await
        .expect("engine builds")
}

pub async fn engine(data_dir: &Path, gateway: Arc<dyn LlmGateway>) -> Engine {
    engine_with(data_dir, Arc::new(LocalEmbedder::default()), gateway).await
}

pub fn jsonl<T: serde::de::DeserializeOwned>(src: &str) -> Vec<T> {
    src.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| serde_json::from_str(l).unwrap_or_else(|e| panic!("bad fixture line {l}: {e}")))
        .collect()
}
