//! The query pipeline: classify, retrieve, route, run agents, validate,
//! persist. Queries read an immutable [`KnowledgeBase`] snapshot, so a
//! reindex swaps generations without any query seeing a partial index.

use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};
use std::time::Instant;

use chrono::Utc;
use nyaya_core::agents::{
    build_request, consolidate, extract_citations, route, AgentOutput, AgentTask, Citation, HistoryTurn, GENERAL_ROLE,
};
use nyaya_core::classifier::build_centroids;
use nyaya_core::compliance::validate;
use nyaya_core::corpus::{ChunkError, CorpusError, IngestReport};
use nyaya_core::retrieval::retrieve;
use nyaya_core::{
    AgentKind, ChunkParams, ChunkStore, Classification, Classifier, ClassifierConfig, Complexity, ComplianceVerdict,
    Corpus, Decision, DomainLabel, DraftResponse, EmbeddingVector, IndexError, RetrievalParams, RoutingDecision,
    VectorIndex,
};
use serde::{Deserialize, Serialize};

use crate::config::Assets;
use crate::embed::{EmbedError, Embedder};
use crate::gateway::{GatewayError, LlmGateway};
use crate::session::{RoutingSummary, SessionError, SessionStore, Turn, VerdictSummary, CONTEXT_TURNS};
use crate::store;

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("query text is empty")]
    EmptyQuery,
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("gateway failure{}: {source}", task_id.as_ref().map(|t| format!(" in task {t}")).unwrap_or_default())]
    Gateway { task_id: Option<String>, source: GatewayError },
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Chunk(#[from] ChunkError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Ingest(#[from] CorpusError),
    #[error("storage error: {0}")]
    Storage(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineParams {
    pub chunk: ChunkParams,
    pub retrieval: RetrievalParams,
    pub classifier: ClassifierConfig,
    pub context_turns: usize,
}

impl Default for EngineParams {
    fn default() -> Self {
        Self {
            chunk: ChunkParams::default(),
            retrieval: RetrievalParams::default(),
            classifier: ClassifierConfig::default(),
            context_turns: CONTEXT_TURNS,
        }
    }
}

/// One immutable generation of corpus, chunks, index and classifier.
#[derive(Debug)]
pub struct KnowledgeBase {
    pub generation: u64,
    pub corpus: Corpus,
    pub chunks: ChunkStore,
    pub index: VectorIndex,
    pub classifier: Classifier,
}

impl KnowledgeBase {
    /// Chunk, embed and index `corpus`; centroids come from labeled chunks.
    pub async fn build(
        generation: u64,
        corpus: Corpus,
        embedder: &dyn Embedder,
        assets: &Assets,
        params: &EngineParams,
    ) -> Result<Self, EngineError> {
        let chunks = corpus.chunk_all(params.chunk)?;
        let texts: Vec<String> = chunks.iter().map(|s| s.chunk.text.clone()).collect();
        let vectors = embedder.embed_batch(&texts).await?;
        let mut index = VectorIndex::new(embedder.dimension())?;
        for (stored, v) in chunks.iter().zip(&vectors) {
            index.add(stored.chunk.chunk_id.clone(), v)?;
        }
        let labeled = chunks.iter().zip(&vectors).filter_map(|(s, v)| s.domain.map(|d| (d, v)));
        let classifier = Classifier::new(assets.lexicon.clone(), build_centroids(labeled), params.classifier);
        Ok(Self { generation, corpus, chunks, index, classifier })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplianceSummary {
    pub decision: Decision,
    pub fired_rules: Vec<String>,
}

/// Response body of a query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub final_text: String,
    pub domain: DomainLabel,
    pub confidence: f64,
    pub complexity: Complexity,
    pub agents_used: Vec<AgentKind>,
    pub citations: Vec<Citation>,
    pub compliance: ComplianceSummary,
    pub timing_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutcome {
    pub result: QueryResult,
    pub turn_ordinal: u64,
    /// Knowledge-base generation the answer was computed against.
    pub generation: u64,
}

/// Pipeline output before persistence.
#[derive(Debug, Clone)]
pub struct Answer {
    pub routing: RoutingDecision,
    pub draft: DraftResponse,
    pub verdict: ComplianceVerdict,
    pub query_embedding: Option<EmbeddingVector>,
    /// Whether retrieval ran; false when the embedder or index failed.
    pub retrieval_available: bool,
}

impl Answer {
    pub fn classification(&self) -> &Classification {
        &self.routing.classification
    }

    /// Citations that are delivered: none for blocked answers.
    pub fn delivered_citations(&self) -> Vec<Citation> {
        if self.verdict.decision == Decision::Blocked {
            Vec::new()
        } else {
            self.draft.citations.clone()
        }
    }

    pub fn to_result(&self, timing_ms: u64) -> QueryResult {
        QueryResult {
            final_text: self.verdict.final_text.clone(),
            domain: self.routing.classification.label,
            confidence: self.routing.classification.confidence,
            complexity: self.routing.complexity,
            agents_used: self.routing.selected_agents.clone(),
            citations: self.delivered_citations(),
            compliance: ComplianceSummary {
                decision: self.verdict.decision,
                fired_rules: self.verdict.fired_rules.clone(),
            },
            timing_ms,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub corpus_docs: usize,
    pub index_size: usize,
    pub index_generation: u64,
    /// Documents that the next reindex will include.
    pub staged_docs: usize,
}

/// Ask one sub-agent. Gateway errors carry the task id.
pub async fn run_sub_agent(
    task: &AgentTask,
    domain: DomainLabel,
    assets: &Assets,
    gateway: &dyn LlmGateway,
) -> Result<AgentOutput, EngineError> {
    let system = assets.templates.for_agent(task.agent_kind, domain, &task.context);
    let request = build_request(task.agent_kind.as_str(), system, &task.session_excerpt, &task.query);
    let response = gateway
        .complete(&request)
        .await
        .map_err(|source| EngineError::Gateway { task_id: Some(task.task_id.clone()), source })?;
    Ok(AgentOutput::from_answer(task, response.content))
}

pub struct Engine {
    kb: RwLock<Arc<KnowledgeBase>>,
    staged: Mutex<Corpus>,
    reindex_lock: tokio::sync::Mutex<()>,
    embedder: Arc<dyn Embedder>,
    gateway: Arc<dyn LlmGateway>,
    assets: Assets,
    sessions: SessionStore,
    params: EngineParams,
    ingest_log: Option<PathBuf>,
}

impl Engine {
    /// Build generation 1 from `corpus`. Documents accepted by
    /// [`Engine::ingest`] are appended to `ingest_log` when it is set.
    pub async fn new(
        corpus: Corpus,
        assets: Assets,
        embedder: Arc<dyn Embedder>,
        gateway: Arc<dyn LlmGateway>,
        sessions: SessionStore,
        params: EngineParams,
        ingest_log: Option<PathBuf>,
    ) -> Result<Self, EngineError> {
        let kb = KnowledgeBase::build(1, corpus.clone(), embedder.as_ref(), &assets, &params).await?;
        Ok(Self {
            kb: RwLock::new(Arc::new(kb)),
            staged: Mutex::new(corpus),
            reindex_lock: tokio::sync::Mutex::new(()),
            embedder,
            gateway,
            assets,
            sessions,
            params,
            ingest_log,
        })
    }

    pub fn snapshot(&self) -> Arc<KnowledgeBase> {
        self.kb.read().unwrap().clone()
    }

    pub fn sessions(&self) -> &SessionStore {
        &self.sessions
    }

    pub fn assets(&self) -> &Assets {
        &self.assets
    }

    pub fn params(&self) -> &EngineParams {
        &self.params
    }

    pub fn embedder(&self) -> &dyn Embedder {
        self.embedder.as_ref()
    }

    pub fn health(&self) -> Health {
        let kb = self.snapshot();
        Health {
            corpus_docs: kb.corpus.len(),
            index_size: kb.index.len(),
            index_generation: kb.generation,
            staged_docs: self.staged.lock().unwrap().len(),
        }
    }

    /// Run the pipeline against `kb` without touching any session.
    pub async fn answer_with(
        &self,
        kb: &KnowledgeBase,
        query: &str,
        history: &[HistoryTurn],
        task_prefix: &str,
    ) -> Result<Answer, EngineError> {
        let query = query.trim();
        if query.is_empty() {
            return Err(EngineError::EmptyQuery);
        }
        let query_embedding = match self.embedder.embed(query).await {
            Ok(v) => Some(v),
            Err(e) => {
                tracing::warn!("query embedding failed, continuing without retrieval: {e}");
                None
            }
        };
        let classification =
            kb.classifier.classify(query, query_embedding.as_ref()).map_err(|_| EngineError::EmptyQuery)?;

        if !classification.label.is_law_domain() {
            let routing = RoutingDecision {
                classification,
                complexity: Complexity::Simple,
                selected_agents: Vec::new(),
                rationale_tags: Vec::new(),
            };
            let draft = DraftResponse::refusal(query);
            let verdict = validate(&draft, &self.assets.rules);
            return Ok(Answer { routing, draft, verdict, query_embedding, retrieval_available: false });
        }

        let context = query_embedding.as_ref().and_then(|v| {
            retrieve(&kb.index, &kb.chunks, v, self.params.retrieval)
                .inspect_err(|e| tracing::warn!("retrieval unavailable, answering ungrounded: {e}"))
                .ok()
        });
        let retrieval_available = context.is_some();
        let context = context.unwrap_or_default();
        let routing = route(query, &classification, &self.assets.markers);
        let domain = classification.label;

        let (text, citations, grounded) = match routing.complexity {
            Complexity::Simple => {
                let system = self.assets.templates.general(domain, &context);
                let request = build_request(GENERAL_ROLE, system, history, query);
                let response = self
                    .gateway
                    .complete(&request)
                    .await
                    .map_err(|source| EngineError::Gateway { task_id: None, source })?;
                let citations = extract_citations(&response.content, &context);
                let grounded = !citations.is_empty();
                (response.content, citations, grounded)
            }
            Complexity::Complex => {
                let mut outputs = Vec::with_capacity(routing.selected_agents.len());
                for &kind in &routing.selected_agents {
                    let task = AgentTask {
                        task_id: format!("{task_prefix}:{kind}"),
                        agent_kind: kind,
                        query: query.to_string(),
                        context: context.clone(),
                        session_excerpt: history.to_vec(),
                    };
                    outputs.push(run_sub_agent(&task, domain, &self.assets, self.gateway.as_ref()).await?);
                }
                consolidate(&outputs)
            }
        };
        let draft = DraftResponse {
            query: query.to_string(),
            text,
            domain,
            refusal: false,
            grounded: grounded && retrieval_available,
            citations,
        };
        let verdict = validate(&draft, &self.assets.rules);
        Ok(Answer { routing, draft, verdict, query_embedding, retrieval_available })
    }

    /// Answer `text` in a session and append the turn. Work on one session
    /// is serialized; different sessions run concurrently.
    pub async fn query(&self, session_id: &str, text: &str) -> Result<QueryOutcome, EngineError> {
        let handle = self.sessions.get(session_id)?;
        let text = text.trim();
        if text.is_empty() {
            return Err(EngineError::EmptyQuery);
        }
        let mut log = handle.lock().await;
        let started = Instant::now();
        let started_at = Utc::now();
        let ordinal = log.next_ordinal();
        let history: Vec<HistoryTurn> = log
            .history(self.params.context_turns)
            .iter()
            .map(|t| HistoryTurn { user_text: t.user_text.clone(), final_text: t.final_text.clone() })
            .collect();
        let kb = self.snapshot();
        let answer = self.answer_with(&kb, text, &history, &format!("{session_id}:{ordinal}")).await?;
        let result = answer.to_result(started.elapsed().as_millis() as u64);
        log.append(Turn {
            ordinal,
            user_text: text.to_string(),
            final_text: result.final_text.clone(),
            classification: answer.routing.classification.clone(),
            routing: RoutingSummary {
                complexity: answer.routing.complexity,
                agents: answer.routing.selected_agents.clone(),
                rationale_tags: answer.routing.rationale_tags.clone(),
            },
            verdict: VerdictSummary { decision: answer.verdict.decision, fired_rules: answer.verdict.fired_rules.clone() },
            citations: result.citations.clone(),
            started_at,
            completed_at: Utc::now(),
        })?;
        Ok(QueryOutcome { result, turn_ordinal: ordinal, generation: kb.generation })
    }

    /// Stage documents for the next reindex. Lenient mode skips bad lines
    /// and reports them; strict mode accepts all lines or none.
    pub fn ingest<'a, I>(&self, lines: I, strict: bool) -> Result<IngestReport, EngineError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut staged = self.staged.lock().unwrap();
        let mut next = staged.clone();
        let before = next.len();
        let now = store::now_millis();
        let report = if strict {
            let count = next.ingest_lines_strict(lines, now)?;
            IngestReport { count, errors: Vec::new() }
        } else {
            next.ingest_lines(lines, now)
        };
        if let Some(path) = &self.ingest_log {
            let mut added = Corpus::new();
            for doc in &next.documents()[before..] {
                added.insert(doc.clone());
            }
            store::append_lines(path, &added.to_jsonl()).map_err(|e| EngineError::Storage(e.to_string()))?;
        }
        *staged = next;
        Ok(report)
    }

    /// Rebuild from the staged corpus and swap it in. Queries already
    /// running keep the generation they started with.
    pub async fn reindex(&self) -> Result<Health, EngineError> {
        let _exclusive = self.reindex_lock.lock().await;
        let corpus = self.staged.lock().unwrap().clone();
        let generation = self.snapshot().generation + 1;
        let kb = KnowledgeBase::build(generation, corpus, self.embedder.as_ref(), &self.assets, &self.params).await?;
        *self.kb.write().unwrap() = Arc::new(kb);
        Ok(self.health())
    }
}
