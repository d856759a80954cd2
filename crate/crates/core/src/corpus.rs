//! Legal documents, the line-delimited corpus record format, and
//! sliding-window chunking.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::classifier::DomainLabel;
use crate::text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocKind {
    ConstitutionalProvision,
    Statute,
    CaseLaw,
    Precedent,
}

pub const DEFAULT_JURISDICTION: &str = "IN";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegalDocument {
    pub id: String,
    pub title: String,
    pub body: String,
    pub doc_kind: DocKind,
    /// `None` for unlabeled documents. Never `OutOfDomain`.
    pub domain: Option<DomainLabel>,
    pub jurisdiction: String,
    pub source_citation: String,
    /// Unix epoch milliseconds, UTC.
    pub ingested_at: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CorpusError {
    #[error("line {line}: malformed record: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: missing or empty field `{field}`")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: duplicate document id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: domain `{value}` cannot label a document")]
    BadDomain { line: usize, value: String },
}

impl CorpusError {
    pub fn line(&self) -> usize {
        match self {
            Self::Malformed { line, .. }
            | Self::MissingField { line, .. }
            | Self::DuplicateId { line, .. }
            | Self::BadDomain { line, .. } => *line,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChunkError {
    #[error("chunk_tokens must be >= 1 and greater than overlap_tokens (got {chunk_tokens}/{overlap_tokens})")]
    BadParams { chunk_tokens: usize, overlap_tokens: usize },
    #[error("document `{0}` has an empty body")]
    EmptyBody(String),
}

/// Wire shape of one corpus line. Unknown fields are ignored.
#[derive(Debug, Deserialize)]
struct RawRecord {
    id: Option<String>,
    title: Option<String>,
    body: Option<String>,
    doc_kind: Option<DocKind>,
    #[serde(default)]
    domain: Option<DomainLabel>,
    #[serde(default)]
    jurisdiction: Option<String>,
    #[serde(default)]
    source_citation: Option<String>,
    #[serde(default)]
    ingested_at: Option<i64>,
}

/// Serialized form written back out by `Corpus::to_jsonl`.
#[derive(Serialize)]
struct OutRecord<'a> {
    id: &'a str,
    title: &'a str,
    body: &'a str,
    doc_kind: DocKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    domain: Option<DomainLabel>,
    jurisdiction: &'a str,
    source_citation: &'a str,
    ingested_at: i64,
}

/// Parse a single corpus line. `line` is 1-based and only used for errors.
pub fn parse_record(raw: &str, line: usize, ingested_at: i64) -> Result<LegalDocument, CorpusError> {
    let rec: RawRecord = serde_json::from_str(raw).map_err(|e| CorpusError::Malformed {
        line,
        reason: e.to_string(),
    })?;
    let nonempty = |v: Option<String>, field: &'static str| match v {
        Some(s) if !s.trim().is_empty() => Ok(s),
        _ => Err(CorpusError::MissingField { line, field }),
    };
    let id = nonempty(rec.id, "id")?;
    let title = rec.title.ok_or(CorpusError::MissingField { line, field: "title" })?;
    let body = nonempty(rec.body, "body")?;
    let doc_kind = rec.doc_kind.ok_or(CorpusError::MissingField { line, field: "doc_kind" })?;
    if rec.domain == Some(DomainLabel::OutOfDomain) {
        return Err(CorpusError::BadDomain { line, value: "out_of_domain".to_string() });
    }
    Ok(LegalDocument {
        id,
        title,
        body,
        doc_kind,
        domain: rec.domain,
        jurisdiction: rec
            .jurisdiction
            .filter(|j| !j.trim().is_empty())
            .unwrap_or_else(|| DEFAULT_JURISDICTION.to_string()),
        source_citation: rec.source_citation.unwrap_or_default(),
        ingested_at: rec.ingested_at.unwrap_or(ingested_at),
    })
}

/// Outcome of a lenient ingest: what was stored and which lines were refused.
#[derive(Debug, Clone, Default)]
pub struct IngestReport {
    pub count: usize,
    pub errors: Vec<CorpusError>,
}

/// An immutable-after-build set of documents, in ingest order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    docs: Vec<LegalDocument>,
    by_id: BTreeMap<String, usize>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn documents(&self) -> &[LegalDocument] {
        &self.docs
    }

    pub fn get(&self, id: &str) -> Option<&LegalDocument> {
        self.by_id.get(id).map(|&i| &self.docs[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }

    /// Insert a document. Returns false, leaving the corpus unchanged, if
    /// the id is taken.
    pub fn insert(&mut self, doc: LegalDocument) -> bool {
        if self.by_id.contains_key(&doc.id) {
            return false;
        }
        self.by_id.insert(doc.id.clone(), self.docs.len());
        self.docs.push(doc);
        true
    }

    /// Ingest line-delimited records. Blank lines are skipped. Bad lines and
    /// duplicate ids are reported and ingestion continues.
    pub fn ingest_lines<'a, I>(&mut self, lines: I, ingested_at: i64) -> IngestReport
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut report = IngestReport::default();
        for (i, raw) in lines.into_iter().enumerate() {
            match self.ingest_one(raw, i + 1, ingested_at) {
                Ok(true) => report.count += 1,
                Ok(false) => {}
                Err(e) => report.errors.push(e),
            }
        }
        report
    }

    /// Like [`Corpus::ingest_lines`] but stops at the first bad line. On error
    /// the corpus is left unchanged.
    pub fn ingest_lines_strict<'a, I>(&mut self, lines: I, ingested_at: i64) -> Result<usize, CorpusError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut staged = self.clone();
        let mut count = 0;
        for (i, raw) in lines.into_iter().enumerate() {
            if staged.ingest_one(raw, i + 1, ingested_at)? {
                count += 1;
            }
        }
        *self = staged;
        Ok(count)
    }

    fn ingest_one(&mut self, raw: &str, line: usize, ingested_at: i64) -> Result<bool, CorpusError> {
        if raw.trim().is_empty() {
            return Ok(false);
        }
        let doc = parse_record(raw, line, ingested_at)?;
        let id = doc.id.clone();
        if !self.insert(doc) {
            return Err(CorpusError::DuplicateId { line, id });
        }
        Ok(true)
    }

    /// Serialize back to the corpus line format.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for d in &self.docs {
            let rec = OutRecord {
                id: &d.id,
                title: &d.title,
                body: &d.body,
                doc_kind: d.doc_kind,
                domain: d.domain,
                jurisdiction: &d.jurisdiction,
                source_citation: &d.source_citation,
                ingested_at: d.ingested_at,
            };
            // serializing a plain struct of strings cannot fail
            out.push_str(&serde_json::to_string(&rec).unwrap_or_default());
            out.push('\n');
        }
        out
    }

    /// Chunk every document, in corpus order.
    pub fn chunk_all(&self, params: ChunkParams) -> Result<ChunkStore, ChunkError> {
        let mut store = ChunkStore::default();
        for doc in &self.docs {
            for chunk in chunk_document(doc, params)? {
                store.push(chunk, doc);
            }
        }
        Ok(store)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkParams {
    pub chunk_tokens: usize,
    pub overlap_tokens: usize,
}

impl Default for ChunkParams {
    fn default() -> Self {
        Self { chunk_tokens: 1000, overlap_tokens: 200 }
    }
}

impl ChunkParams {
    pub fn validate(&self) -> Result<(), ChunkError> {
        if self.chunk_tokens == 0 || self.chunk_tokens <= self.overlap_tokens {
            return Err(ChunkError::BadParams {
                chunk_tokens: self.chunk_tokens,
                overlap_tokens: self.overlap_tokens,
            });
        }
        Ok(())
    }

    pub fn stride(&self) -> usize {
        self.chunk_tokens - self.overlap_tokens
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub ordinal: usize,
    pub text: String,
    pub token_start: usize,
    pub token_end: usize,
}

pub fn chunk_id(doc_id: &str, ordinal: usize) -> String {
    format!("{doc_id}#{ordinal}")
}

/// Split a document into windows of `chunk_tokens` whitespace tokens that
/// advance by `chunk_tokens - overlap_tokens`. The last window is cut at the
/// end of the document; a document no longer than one window is one chunk.
pub fn chunk_document(doc: &LegalDocument, params: ChunkParams) -> Result<Vec<Chunk>, ChunkError> {
    params.validate()?;
    let toks = text::token_vec(&doc.body);
    if toks.is_empty() {
        return Err(ChunkError::EmptyBody(doc.id.clone()));
    }
    let n = toks.len();
    let stride = params.stride();
    let mut chunks = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + params.chunk_tokens).min(n);
        let ordinal = chunks.len();
        chunks.push(Chunk {
            chunk_id: chunk_id(&doc.id, ordinal),
            doc_id: doc.id.clone(),
            ordinal,
            text: text::join_tokens(&toks[start..end]),
            token_start: start,
            token_end: end,
        });
        if end == n {
            break;
        }
        start += stride;
    }
    Ok(chunks)
}

/// A chunk together with the document metadata retrieval needs.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredChunk {
    pub chunk: Chunk,
    pub source_citation: String,
    pub domain: Option<DomainLabel>,
}

/// All chunks of a corpus, addressable by chunk id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChunkStore {
    chunks: Vec<StoredChunk>,
    by_id: BTreeMap<String, usize>,
}

impl ChunkStore {
    fn push(&mut self, chunk: Chunk, doc: &LegalDocument) {
        self.by_id.insert(chunk.chunk_id.clone(), self.chunks.len());
        self.chunks.push(StoredChunk {
            chunk,
            source_citation: doc.source_citation.clone(),
            domain: doc.domain,
        });
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn get(&self, chunk_id: &str) -> Option<&StoredChunk> {
        self.by_id.get(chunk_id).map(|&i| &self.chunks[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &StoredChunk> {
        self.chunks.iter()
    }
}
