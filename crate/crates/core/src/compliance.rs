//! Rule engine that every draft passes through before delivery.
//!
//! Rules are evaluated by kind, in file order within a kind:
//!
//! 1. `blocklist_pattern`: pattern in the draft or the query blocks.
//! 2. `jurisdiction_guard`: foreign-law term in the draft blocks unless the
//!    query asks for a comparison.
//! 3. `grounding_guard`: an in-domain answer without citations gets the
//!    not-grounded disclaimer.
//! 4. `disclaimer_trigger`: with a pattern, fires on matching in-domain
//!    answers; without one, fires on every in-domain answer.
//!
//! The first block wins and replaces the draft with the rule message.
//! Refusals are never annotated. Appended disclaimers end with
//! [`DISCLAIMER_SENTINEL`]; a draft that already carries it is not
//! disclaimed again.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::agents::DraftResponse;
use crate::text;

pub const DISCLAIMER_SENTINEL: &str = "[nyaya-disclaimer]";
pub const DISCLAIMER_SEPARATOR: &str = "\n\n---\n";

/// Query terms that exempt a draft from the jurisdiction guard.
pub const COMPARATIVE_TERMS: [&str; 3] = ["compare", "versus", "difference between"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    BlocklistPattern,
    JurisdictionGuard,
    GroundingGuard,
    DisclaimerTrigger,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleAction {
    Block,
    AppendDisclaimer,
    Annotate,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    #[default]
    Word,
    Substring,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplianceRule {
    pub rule_id: String,
    pub kind: RuleKind,
    #[serde(default)]
    pub pattern: Option<String>,
    #[serde(default, rename = "match")]
    pub match_mode: MatchMode,
    pub action: RuleAction,
    pub message: String,
}

impl ComplianceRule {
    fn matches(&self, haystack_lower: &str) -> bool {
        match (&self.pattern, self.match_mode) {
            (Some(p), MatchMode::Word) => text::contains_word(haystack_lower, p),
            (Some(p), MatchMode::Substring) => text::contains_substring(haystack_lower, p),
            (None, _) => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuleError {
    #[error("rules line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("rules line {line}: duplicate rule_id `{rule_id}`")]
    DuplicateId { line: usize, rule_id: String },
    #[error("rules line {line}: rule `{rule_id}`: {reason}")]
    Invalid { line: usize, rule_id: String, reason: &'static str },
    #[error("rule set is empty")]
    Empty,
}

fn check_rule(rule: &ComplianceRule, line: usize) -> Result<(), RuleError> {
    let invalid = |reason| Err(RuleError::Invalid { line, rule_id: rule.rule_id.clone(), reason });
    if rule.rule_id.trim().is_empty() {
        return invalid("empty rule_id");
    }
    if rule.message.trim().is_empty() {
        return invalid("empty message");
    }
    if rule.message.contains(DISCLAIMER_SENTINEL) {
        return invalid("message must not contain the disclaimer sentinel");
    }
    let has_pattern = rule.pattern.as_deref().is_some_and(|p| !p.trim().is_empty());
    if rule.pattern.is_some() && !has_pattern {
        return invalid("empty pattern");
    }
    match rule.kind {
        RuleKind::BlocklistPattern | RuleKind::JurisdictionGuard => {
            if !has_pattern {
                return invalid("blocking rules need a pattern");
            }
            if rule.action != RuleAction::Block {
                return invalid("blocking rules must use action `block`");
            }
        }
        RuleKind::GroundingGuard => {
            if has_pattern {
                return invalid("grounding guards take no pattern");
            }
            if rule.action == RuleAction::Block {
                return invalid("grounding guards cannot block");
            }
        }
        RuleKind::DisclaimerTrigger => {
            if rule.action == RuleAction::Block {
                return invalid("disclaimer triggers cannot block");
            }
        }
    }
    Ok(())
}

/// Validated, ordered rules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSet {
    rules: Vec<ComplianceRule>,
}

impl RuleSet {
    pub fn new(rules: Vec<ComplianceRule>) -> Result<Self, RuleError> {
        let mut seen = BTreeSet::new();
        for (i, r) in rules.iter().enumerate() {
            check_rule(r, i + 1)?;
            if !seen.insert(r.rule_id.clone()) {
                return Err(RuleError::DuplicateId { line: i + 1, rule_id: r.rule_id.clone() });
            }
        }
        if rules.is_empty() {
            return Err(RuleError::Empty);
        }
        Ok(Self { rules })
    }

    /// Parse line-delimited rule records. Blank lines and `#` comments are
    /// skipped; line numbers in errors refer to the source text.
    pub fn from_jsonl(src: &str) -> Result<Self, RuleError> {
        let mut rules = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, raw) in src.lines().enumerate() {
            let line = i + 1;
            let raw = raw.trim();
            if raw.is_empty() || raw.starts_with('#') {
                continue;
            }
            let rule: ComplianceRule =
                serde_json::from_str(raw).map_err(|e| RuleError::Malformed { line, reason: e.to_string() })?;
            check_rule(&rule, line)?;
            if !seen.insert(rule.rule_id.clone()) {
                return Err(RuleError::DuplicateId { line, rule_id: rule.rule_id });
            }
            rules.push(rule);
        }
        if rules.is_empty() {
            return Err(RuleError::Empty);
        }
        Ok(Self { rules })
    }

    pub fn rules(&self) -> &[ComplianceRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    fn of_kind(&self, kind: RuleKind) -> impl Iterator<Item = &ComplianceRule> {
        self.rules.iter().filter(move |r| r.kind == kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Pass,
    PassWithDisclaimer,
    Blocked,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplianceVerdict {
    pub decision: Decision,
    pub fired_rules: Vec<String>,
    pub final_text: String,
}

pub fn has_disclaimer(text: &str) -> bool {
    text.lines().any(|l| l.trim() == DISCLAIMER_SENTINEL)
}

pub fn is_comparative(query_lower: &str) -> bool {
    COMPARATIVE_TERMS.iter().any(|t| text::contains_word(query_lower, t))
}

fn blocked(rule: &ComplianceRule) -> ComplianceVerdict {
    ComplianceVerdict {
        decision: Decision::Blocked,
        fired_rules: alloc::vec![rule.rule_id.clone()],
        final_text: rule.message.clone(),
    }
}

pub fn validate(draft: &DraftResponse, rules: &RuleSet) -> ComplianceVerdict {
    let text_lower = draft.text.to_lowercase();
    let query_lower = draft.query.to_lowercase();

    if let Some(r) = rules
        .of_kind(RuleKind::BlocklistPattern)
        .find(|r| r.matches(&text_lower) || r.matches(&query_lower))
    {
        return blocked(r);
    }
    if !is_comparative(&query_lower) {
        if let Some(r) = rules.of_kind(RuleKind::JurisdictionGuard).find(|r| r.matches(&text_lower)) {
            return blocked(r);
        }
    }
    if !draft.in_domain() {
        return ComplianceVerdict { decision: Decision::Pass, fired_rules: Vec::new(), final_text: draft.text.clone() };
    }

    let mut fired: Vec<&ComplianceRule> = Vec::new();
    if !draft.grounded {
        fired.extend(rules.of_kind(RuleKind::GroundingGuard));
    }
    fired.extend(
        rules
            .of_kind(RuleKind::DisclaimerTrigger)
            .filter(|r| r.pattern.is_none() || r.matches(&text_lower)),
    );

    let mut messages: Vec<&str> = Vec::new();
    for r in fired.iter().filter(|r| r.action == RuleAction::AppendDisclaimer) {
        if !messages.contains(&r.message.as_str()) {
            messages.push(r.message.as_str());
        }
    }
    let fired_rules = fired.iter().map(|r| r.rule_id.clone()).collect();
    if messages.is_empty() {
        return ComplianceVerdict { decision: Decision::Pass, fired_rules, final_text: draft.text.clone() };
    }
    let final_text = if has_disclaimer(&draft.text) {
        draft.text.clone()
    } else {
        let mut t = draft.text.trim_end().to_string();
        t.push_str(DISCLAIMER_SEPARATOR);
        for m in messages {
            t.push_str(m.trim());
            t.push('\n');
        }
        t.push_str(DISCLAIMER_SENTINEL);
        t
    };
    ComplianceVerdict { decision: Decision::PassWithDisclaimer, fired_rules, final_text }
}
