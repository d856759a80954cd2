//! Orchestrator-side logic that does not talk to an LLM: routing queries to
//! sub-agents, prompt rendering, citation extraction and consolidation of
//! sub-agent answers.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::chat::{ChatMessage, ChatRequest};
use crate::classifier::{Classification, DomainLabel};
use crate::retrieval::RetrievedContext;
use crate::text;

/// Sub-agents, declared in their fixed execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Research,
    CaseAnalysis,
    Summarization,
    Drafting,
}

impl AgentKind {
    pub const ALL: [AgentKind; 4] = [Self::Research, Self::CaseAnalysis, Self::Summarization, Self::Drafting];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Research => "research",
            Self::CaseAnalysis => "case_analysis",
            Self::Summarization => "summarization",
            Self::Drafting => "drafting",
        }
    }

    pub fn heading(self) -> &'static str {
        match self {
            Self::Research => "Legal Research",
            Self::CaseAnalysis => "Case Analysis",
            Self::Summarization => "Summary",
            Self::Drafting => "Draft",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Role tag of the orchestrator's own direct answers.
pub const GENERAL_ROLE: &str = "general";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Complexity {
    Simple,
    Complex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkerStrength {
    /// An explicit request ("summarize", "draft").
    Strong,
    /// Subject matter ("judgment", "section"); only counts when no strong
    /// marker fired anywhere in the query.
    Weak,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Marker {
    pub agent: AgentKind,
    pub marker: String,
    pub strength: MarkerStrength,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AgentsError {
    #[error("marker table line {line}: {reason}")]
    BadMarkers { line: usize, reason: String },
    #[error("template `{0}` is missing the {{context}} placeholder")]
    BadTemplate(String),
    #[error("no template for `{0}`")]
    MissingTemplate(String),
}

/// Intent markers that select sub-agents. Matching is case-insensitive on
/// word boundaries.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MarkerTable {
    markers: Vec<Marker>,
}

impl MarkerTable {
    pub fn new(markers: Vec<Marker>) -> Self {
        Self { markers }
    }

    pub fn from_jsonl(src: &str) -> Result<Self, AgentsError> {
        let mut markers = Vec::new();
        for (i, raw) in src.lines().enumerate() {
            let raw = raw.trim();
            if raw.is_empty() || raw.starts_with('#') {
                continue;
            }
            let m: Marker = serde_json::from_str(raw)
                .map_err(|e| AgentsError::BadMarkers { line: i + 1, reason: e.to_string() })?;
            if m.marker.trim().is_empty() {
                return Err(AgentsError::BadMarkers { line: i + 1, reason: "empty marker".to_string() });
            }
            markers.push(Marker { marker: m.marker.trim().to_lowercase(), ..m });
        }
        Ok(Self { markers })
    }

    pub fn markers(&self) -> &[Marker] {
        &self.markers
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingDecision {
    pub classification: Classification,
    pub complexity: Complexity,
    /// In execution order; empty iff simple.
    pub selected_agents: Vec<AgentKind>,
    /// Markers that fired, in table order.
    pub rationale_tags: Vec<String>,
}

/// Count of `?` characters, each taken as a question.
pub fn question_count(query: &str) -> usize {
    query.chars().filter(|&c| c == '?').count()
}

/// Decide simple vs complex and pick sub-agents.
///
/// A query is complex when any marker fires or it asks two or more
/// questions. Complex queries without any marker go to research.
pub fn route(query: &str, classification: &Classification, table: &MarkerTable) -> RoutingDecision {
    let lower = query.to_lowercase();
    let fired: Vec<&Marker> = table.markers.iter().filter(|m| text::contains_word(&lower, &m.marker)).collect();
    let any_strong = fired.iter().any(|m| m.strength == MarkerStrength::Strong);
    let effective: Vec<&Marker> = fired
        .into_iter()
        .filter(|m| !any_strong || m.strength == MarkerStrength::Strong)
        .collect();

    let mut agents: BTreeSet<AgentKind> = effective.iter().map(|m| m.agent).collect();
    let mut rationale_tags: Vec<String> = Vec::new();
    for m in &effective {
        if !rationale_tags.contains(&m.marker) {
            rationale_tags.push(m.marker.clone());
        }
    }
    let multi_question = question_count(query) >= 2;
    if multi_question {
        rationale_tags.push("multiple_questions".to_string());
    }
    let complexity = if agents.is_empty() && !multi_question { Complexity::Simple } else { Complexity::Complex };
    if complexity == Complexity::Complex && agents.is_empty() {
        agents.insert(AgentKind::Research);
    }
    RoutingDecision {
        classification: classification.clone(),
        complexity,
        selected_agents: agents.into_iter().collect(),
        rationale_tags,
    }
}

/// One earlier exchange, as shown to agents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryTurn {
    pub user_text: String,
    pub final_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTask {
    pub task_id: String,
    pub agent_kind: AgentKind,
    pub query: String,
    pub context: RetrievedContext,
    pub session_excerpt: Vec<HistoryTurn>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Citation {
    pub chunk_id: String,
    pub source_citation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentOutput {
    pub task_id: String,
    pub agent_kind: AgentKind,
    pub answer: String,
    pub citations: Vec<Citation>,
    pub grounded: bool,
}

impl AgentOutput {
    pub fn from_answer(task: &AgentTask, answer: String) -> Self {
        let citations = extract_citations(&answer, &task.context);
        Self {
            task_id: task.task_id.clone(),
            agent_kind: task.agent_kind,
            grounded: !citations.is_empty(),
            answer,
            citations,
        }
    }
}

/// Resolve `[n]` markers in `answer` to passages of `context` (1-based).
/// Out-of-range markers are ignored; repeats keep their first position.
pub fn extract_citations(answer: &str, context: &RetrievedContext) -> Vec<Citation> {
    let mut out: Vec<Citation> = Vec::new();
    let bytes = answer.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'[' {
            let digits_start = i + 1;
            let mut j = digits_start;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            if j > digits_start && j < bytes.len() && bytes[j] == b']' {
                let n = answer[digits_start..j].parse::<usize>().ok();
                if let Some(p) = n.and_then(|n| context.passage_for_marker(n)) {
                    if !out.iter().any(|c| c.chunk_id == p.chunk_id) {
                        out.push(Citation { chunk_id: p.chunk_id.clone(), source_citation: p.source_citation.clone() });
                    }
                }
                i = j + 1;
                continue;
            }
        }
        i += 1;
    }
    out
}

/// Order-preserving union of citation lists, deduplicated by chunk id.
pub fn union_citations<'a, I>(lists: I) -> Vec<Citation>
where
    I: IntoIterator<Item = &'a [Citation]>,
{
    let mut out: Vec<Citation> = Vec::new();
    for list in lists {
        for c in list {
            if !out.iter().any(|o| o.chunk_id == c.chunk_id) {
                out.push(c.clone());
            }
        }
    }
    out
}

/// Consolidated answer text, citations and grounding of sub-agent outputs.
/// A single output is passed through verbatim; several are joined under
/// agent headings.
pub fn consolidate(outputs: &[AgentOutput]) -> (String, Vec<Citation>, bool) {
    let citations = union_citations(outputs.iter().map(|o| o.citations.as_slice()));
    let grounded = !citations.is_empty();
    let text = match outputs {
        [] => String::new(),
        [one] => one.answer.clone(),
        many => {
            let sections: Vec<String> =
                many.iter().map(|o| format!("## {}\n\n{}", o.agent_kind.heading(), o.answer.trim_end())).collect();
            sections.join("\n\n")
        }
    };
    (text, citations, grounded)
}

pub const REFUSAL_TEXT: &str = "I can only help with questions about Indian constitutional, criminal, civil, family, and corporate law. Please rephrase your question within one of these areas.";

/// A response awaiting compliance review.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DraftResponse {
    pub query: String,
    pub text: String,
    pub domain: DomainLabel,
    /// Fixed out-of-domain refusal; carries no legal information.
    pub refusal: bool,
    pub grounded: bool,
    pub citations: Vec<Citation>,
}

impl DraftResponse {
    pub fn refusal(query: impl Into<String>) -> Self {
        Self {
            query: query.into(),
            text: REFUSAL_TEXT.to_string(),
            domain: DomainLabel::OutOfDomain,
            refusal: true,
            grounded: false,
            citations: Vec::new(),
        }
    }

    pub fn in_domain(&self) -> bool {
        !self.refusal && self.domain.is_law_domain()
    }
}

pub const CONTEXT_PLACEHOLDER: &str = "{context}";
pub const DOMAIN_PLACEHOLDER: &str = "{domain}";
pub const NO_CONTEXT_TEXT: &str = "(no passages were retrieved from the knowledge base)";

/// System-prompt templates for the direct answer path and each sub-agent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    general: String,
    agents: BTreeMap<AgentKind, String>,
}

impl PromptTemplates {
    pub fn new(general: String, agents: BTreeMap<AgentKind, String>) -> Result<Self, AgentsError> {
        if !general.contains(CONTEXT_PLACEHOLDER) {
            return Err(AgentsError::BadTemplate(GENERAL_ROLE.to_string()));
        }
        for kind in AgentKind::ALL {
            let t = agents.get(&kind).ok_or_else(|| AgentsError::MissingTemplate(kind.as_str().to_string()))?;
            if !t.contains(CONTEXT_PLACEHOLDER) {
                return Err(AgentsError::BadTemplate(kind.as_str().to_string()));
            }
        }
        Ok(Self { general, agents })
    }

    pub fn general(&self, domain: DomainLabel, context: &RetrievedContext) -> String {
        render(&self.general, domain, context)
    }

    pub fn for_agent(&self, kind: AgentKind, domain: DomainLabel, context: &RetrievedContext) -> String {
        render(&self.agents[&kind], domain, context)
    }
}

fn render(template: &str, domain: DomainLabel, context: &RetrievedContext) -> String {
    let ctx = if context.context_text.is_empty() { NO_CONTEXT_TEXT } else { context.context_text.as_str() };
    template.replace(DOMAIN_PLACEHOLDER, domain.as_str()).replace(CONTEXT_PLACEHOLDER, ctx)
}

/// Prior turns as alternating user/assistant messages, then the query.
pub fn build_request(agent_role: &str, system_prompt: String, history: &[HistoryTurn], query: &str) -> ChatRequest {
    let mut messages = Vec::with_capacity(history.len() * 2 + 1);
    for t in history {
        messages.push(ChatMessage::user(t.user_text.clone()));
        messages.push(ChatMessage::assistant(t.final_text.clone()));
    }
    messages.push(ChatMessage::user(query));
    ChatRequest::new(agent_role, system_prompt, messages)
}
