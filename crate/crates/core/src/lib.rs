//! Core of the Nyaya legal assistant.
//!
//! Everything in this crate is pure computation over in-memory values and
//! only needs `alloc`: document chunking, the deterministic hashing embedder,
//! exact cosine k-NN search with its binary codec, domain classification,
//! retrieval context assembly, query routing and citation extraction, the
//! compliance rule engine, and the evaluation metrics. File IO, HTTP, the
//! LLM gateways and session storage live in the `nyaya` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod agents;
pub mod chat;
pub mod classifier;
pub mod compliance;
pub mod corpus;
pub mod embedding;
pub mod evals;
pub mod index;
pub mod retrieval;
pub mod text;

pub use agents::{
    AgentKind, AgentOutput, AgentTask, Citation, Complexity, DraftResponse, MarkerTable,
    PromptTemplates, RoutingDecision,
};
pub use chat::{ChatMessage, ChatRequest, ChatResponse, ChatRole, Script, ScriptError, Usage};
pub use classifier::{
    Classification, Classifier, ClassifierConfig, DomainLabel, Lexicon, LAW_DOMAINS,
};
pub use compliance::{ComplianceRule, ComplianceVerdict, Decision, RuleSet};
pub use evals::{EvalRecord, EvalReport, Observation};
pub use corpus::{Chunk, ChunkParams, ChunkStore, Corpus, DocKind, LegalDocument};
pub use embedding::{EmbeddingError, EmbeddingVector, LocalEmbedder};
pub use index::{IndexError, SearchHit, VectorIndex};
pub use retrieval::{Passage, RetrievalParams, RetrievedContext};
