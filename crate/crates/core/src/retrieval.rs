//! Assembly of grounded context from index hits.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::ChunkStore;
use crate::embedding::EmbeddingVector;
use crate::index::{IndexError, VectorIndex};
use crate::text;

pub const PASSAGE_DELIMITER: &str = "\n\n";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalParams {
    pub k: usize,
    pub min_score: f64,
    /// Whitespace tokens allowed in `context_text`.
    pub token_budget: usize,
}

impl Default for RetrievalParams {
    fn default() -> Self {
        Self { k: 5, min_score: 0.25, token_budget: 3000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Passage {
    pub chunk_id: String,
    pub doc_id: String,
    pub source_citation: String,
    pub score: f64,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RetrievedContext {
    pub passages: Vec<Passage>,
    pub context_text: String,
    pub token_budget_used: usize,
}

impl RetrievedContext {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Passage for a 1-based bracket marker.
    pub fn passage_for_marker(&self, n: usize) -> Option<&Passage> {
        n.checked_sub(1).and_then(|i| self.passages.get(i))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RetrievalError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("index entry `{0}` has no chunk in the corpus")]
    MissingChunk(String),
}

fn header(n: usize, citation: &str) -> String {
    if citation.is_empty() {
        format!("[{n}]")
    } else {
        format!("[{n}] {citation}")
    }
}

/// Search, drop hits below `min_score`, and pack passages in score order
/// until the next one would overflow the token budget. Each passage is
/// rendered as a `[n] <source_citation>` line followed by the chunk text.
pub fn retrieve(
    index: &VectorIndex,
    chunks: &ChunkStore,
    query: &EmbeddingVector,
    params: RetrievalParams,
) -> Result<RetrievedContext, RetrievalError> {
    if params.k == 0 {
        return Err(RetrievalError::ZeroK);
    }
    let hits = index.search(query, params.k)?;
    let mut ctx = RetrievedContext::empty();
    for hit in hits.into_iter().filter(|h| h.score >= params.min_score) {
        let stored = chunks.get(&hit.chunk_id).ok_or_else(|| RetrievalError::MissingChunk(hit.chunk_id.clone()))?;
        let n = ctx.passages.len() + 1;
        let head = header(n, &stored.source_citation);
        let cost = text::token_count(&head) + text::token_count(&stored.chunk.text);
        if ctx.token_budget_used + cost > params.token_budget {
            break;
        }
        if !ctx.context_text.is_empty() {
            ctx.context_text.push_str(PASSAGE_DELIMITER);
        }
        ctx.context_text.push_str(&head);
        ctx.context_text.push('\n');
        ctx.context_text.push_str(&stored.chunk.text);
        ctx.token_budget_used += cost;
        ctx.passages.push(Passage {
            chunk_id: hit.chunk_id,
            doc_id: stored.chunk.doc_id.clone(),
            source_citation: stored.source_citation.clone(),
            score: hit.score,
            text: stored.chunk.text.clone(),
        });
    }
    Ok(ctx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ChunkParams, Corpus};
    use crate::embedding::LocalEmbedder;
    use alloc::string::ToString;
    use proptest::prelude::*;

    fn corpus(bodies: &[&str]) -> (Corpus, ChunkStore, VectorIndex, LocalEmbedder) {
        let mut c = Corpus::new();
        let lines: Vec<String> = bodies
            .iter()
            .enumerate()
            .map(|(i, b)| {
                format!(r#"{{"id":"d{i}","title":"t","body":"{b}","doc_kind":"statute","source_citation":"Act s.{i}"}}"#)
            })
            .collect();
        let r = c.ingest_lines(lines.iter().map(|s| s.as_str()), 0);
        assert!(r.errors.is_empty());
        let store = c.chunk_all(ChunkParams::default()).unwrap();
        let e = LocalEmbedder::new(64).unwrap();
        let mut idx = VectorIndex::new(64).unwrap();
        for s in store.iter() {
            idx.add(s.chunk.chunk_id.clone(), &e.embed(&s.chunk.text).unwrap()).unwrap();
        }
        (c, store, idx, e)
    }

    #[test]
    fn empty_index_gives_empty_context() {
        let idx = VectorIndex::new(8).unwrap();
        let q = LocalEmbedder::new(8).unwrap().embed("x").unwrap();
        let ctx = retrieve(&idx, &ChunkStore::default(), &q, RetrievalParams::default()).unwrap();
        assert_eq!(ctx, RetrievedContext::empty());
    }

    #[test]
    fn k_capped_at_index_size() {
        let (_, store, idx, e) = corpus(&["theft of goods", "bail rules", "marriage age"]);
        let q = e.embed("theft").unwrap();
        let ctx = retrieve(&idx, &store, &q, RetrievalParams { k: 5, min_score: -1.0, token_budget: 3000 }).unwrap();
        assert_eq!(ctx.passages.len(), 3);
        assert_eq!(ctx.passages[0].chunk_id, "d0#0");
        assert!(ctx.context_text.starts_with("[1] Act s.0\ntheft of goods"));
        assert_eq!(ctx.token_budget_used, text::token_count(&ctx.context_text));
    }

    #[test]
    fn min_score_filters() {
        let (_, store, idx, e) = corpus(&["theft of goods", "marriage age"]);
        let q = e.embed("theft").unwrap();
        let ctx = retrieve(&idx, &store, &q, RetrievalParams { k: 5, min_score: 0.25, token_budget: 3000 }).unwrap();
        assert!(ctx.passages.iter().all(|p| p.score >= 0.25));
        assert_eq!(ctx.passages[0].doc_id, "d0");
    }

    #[test]
    fn budget_stops_packing() {
        let (_, store, idx, e) = corpus(&["theft of goods", "theft again here"]);
        let q = e.embed("theft").unwrap();
        // each passage costs 3 header tokens + 3 text tokens
        let ctx = retrieve(&idx, &store, &q, RetrievalParams { k: 5, min_score: -1.0, token_budget: 11 }).unwrap();
        assert_eq!(ctx.passages.len(), 1);
        assert_eq!(ctx.token_budget_used, 6);
    }

    #[test]
    fn missing_chunk_is_reported() {
        let mut idx = VectorIndex::new(8).unwrap();
        let e = LocalEmbedder::new(8).unwrap();
        idx.add("ghost#0", &e.embed("x").unwrap()).unwrap();
        let err = retrieve(&idx, &ChunkStore::default(), &e.embed("x").unwrap(), RetrievalParams { min_score: -1.0, ..Default::default() });
        assert_eq!(err, Err(RetrievalError::MissingChunk("ghost#0".to_string())));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn context_respects_budget(
            bodies in proptest::collection::vec(proptest::collection::vec("[a-e]{1,3}", 1..30), 1..20),
            budget in 0usize..60,
            k in 1usize..10,
        ) {
            let joined: Vec<String> = bodies.iter().map(|b| b.join(" ")).collect();
            let refs: Vec<&str> = joined.iter().map(|s| s.as_str()).collect();
            let (_, store, idx, e) = corpus(&refs);
            let q = e.embed("a b c").unwrap();
            let ctx = retrieve(&idx, &store, &q, RetrievalParams { k, min_score: -1.0, token_budget: budget }).unwrap();
            prop_assert!(ctx.token_budget_used <= budget);
            prop_assert_eq!(text::token_count(&ctx.context_text), ctx.token_budget_used);
            prop_assert!(ctx.passages.windows(2).all(|w| w[0].score >= w[1].score));
        }
    }
}
