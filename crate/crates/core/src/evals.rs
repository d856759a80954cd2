//! Evaluation metrics and report rendering.
//!
//! All metric functions are pure and order-independent over aligned inputs.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::classifier::{DomainLabel, LAW_DOMAINS};

/// Fraction of gold keyphrases an answer must contain to count as accurate.
pub const KEYPHRASE_COVERAGE_THRESHOLD: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    LegalJargon,
    JurisdictionalAmbiguity,
    ContextMisunderstanding,
    OutOfDomainQuery,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 4] = [
        Self::LegalJargon,
        Self::JurisdictionalAmbiguity,
        Self::ContextMisunderstanding,
        Self::OutOfDomainQuery,
    ];

    pub fn display_name(self) -> &'static str {
        match self {
            Self::LegalJargon => "Legal Jargon Complexity",
            Self::JurisdictionalAmbiguity => "Jurisdictional Ambiguity",
            Self::ContextMisunderstanding => "Context Misunderstanding",
            Self::OutOfDomainQuery => "Out-of-Domain Queries",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub query: String,
    pub gold_domain: DomainLabel,
    #[serde(default)]
    pub relevant_chunk_ids: BTreeSet<String>,
    #[serde(default)]
    pub gold_answer_keyphrases: Vec<String>,
    #[serde(default)]
    pub error_category_gold: Option<ErrorCategory>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("inputs have different lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("F1 is undefined when precision and recall are both zero")]
    UndefinedF1,
    #[error("precision and recall must lie in [0, 1]")]
    OutOfRange,
    #[error("dataset line {line}: {reason}")]
    BadRecord { line: usize, reason: String },
}

impl EvalRecord {
    pub fn validate(&self) -> Result<(), &'static str> {
        if self.query.trim().is_empty() {
            return Err("empty query");
        }
        if self.relevant_chunk_ids.is_empty() && self.gold_domain.is_law_domain() {
            return Err("in-domain records need relevant_chunk_ids");
        }
        Ok(())
    }
}

/// Parse a line-delimited dataset; blank lines and `#` comments skipped.
pub fn parse_dataset(src: &str) -> Result<Vec<EvalRecord>, EvalError> {
    let mut out = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        let raw = raw.trim();
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let rec: EvalRecord = serde_json::from_str(raw)
            .map_err(|e| EvalError::BadRecord { line: i + 1, reason: format!("{e}") })?;
        rec.validate().map_err(|r| EvalError::BadRecord { line: i + 1, reason: r.into() })?;
        out.push(rec);
    }
    Ok(out)
}

fn check_len(a: usize, b: usize) -> Result<(), EvalError> {
    if a != b {
        return Err(EvalError::LengthMismatch { left: a, right: b });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerDomain {
    /// `None` where the denominator is zero.
    pub per_domain: BTreeMap<DomainLabel, Option<f64>>,
    /// Unweighted mean over defined domains.
    pub macro_average: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn per_domain_rate(predictions: &[DomainLabel], golds: &[DomainLabel], by_prediction: bool) -> Result<PerDomain, EvalError> {
    check_len(predictions.len(), golds.len())?;
    let mut tp: BTreeMap<DomainLabel, usize> = BTreeMap::new();
    let mut denom: BTreeMap<DomainLabel, usize> = BTreeMap::new();
    for (p, g) in predictions.iter().zip(golds) {
        let key = if by_prediction { *p } else { *g };
        *denom.entry(key).or_default() += 1;
        if p == g {
            *tp.entry(key).or_default() += 1;
        }
    }
    let per_domain: BTreeMap<_, _> = DomainLabel::ALL
        .iter()
        .map(|&d| {
            let n = denom.get(&d).copied().unwrap_or(0);
            let rate = (n > 0).then(|| tp.get(&d).copied().unwrap_or(0) as f64 / n as f64);
            (d, rate)
        })
        .collect();
    let macro_average = mean(per_domain.values().filter_map(|v| *v));
    Ok(PerDomain { per_domain, macro_average })
}

/// Per-label precision `TP / (TP + FP)` over all six labels.
pub fn domain_precision(predictions: &[DomainLabel], golds: &[DomainLabel]) -> Result<PerDomain, EvalError> {
    per_domain_rate(predictions, golds, true)
}

/// Per-label recall `TP / (TP + FN)` over all six labels.
pub fn domain_recall(predictions: &[DomainLabel], golds: &[DomainLabel]) -> Result<PerDomain, EvalError> {
    per_domain_rate(predictions, golds, false)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionAtK {
    pub k: usize,
    pub value: Option<f64>,
    pub evaluated: usize,
    /// Queries skipped because they have no relevant chunks.
    pub excluded_no_relevant: usize,
}

/// Mean over queries of `|top-k ∩ relevant| / min(k, |top-k|)`. A query that
/// retrieved nothing scores 0.
pub fn retrieval_precision_at_k(
    results: &[Vec<String>],
    relevant: &[BTreeSet<String>],
    k: usize,
) -> Result<PrecisionAtK, EvalError> {
    if k == 0 {
        return Err(EvalError::ZeroK);
    }
    check_len(results.len(), relevant.len())?;
    let mut excluded = 0;
    let mut per_query = Vec::new();
    for (hits, rel) in results.iter().zip(relevant) {
        if rel.is_empty() {
            excluded += 1;
            continue;
        }
        let top = &hits[..hits.len().min(k)];
        let p = if top.is_empty() {
            0.0
        } else {
            top.iter().filter(|id| rel.contains(*id)).count() as f64 / top.len() as f64
        };
        per_query.push(p);
    }
    Ok(PrecisionAtK {
        k,
        evaluated: per_query.len(),
        value: mean(per_query.into_iter()),
        excluded_no_relevant: excluded,
    })
}

/// Fraction of `keyphrases` occurring in `answer`, case-insensitively.
/// `None` when there are no keyphrases.
pub fn keyphrase_coverage(answer: &str, keyphrases: &[String]) -> Option<f64> {
    if keyphrases.is_empty() {
        return None;
    }
    let lower = answer.to_lowercase();
    let hit = keyphrases.iter().filter(|k| lower.contains(k.to_lowercase().as_str())).count();
    Some(hit as f64 / keyphrases.len() as f64)
}

pub fn is_accurate(answer: &str, keyphrases: &[String]) -> Option<bool> {
    keyphrase_coverage(answer, keyphrases).map(|c| c >= KEYPHRASE_COVERAGE_THRESHOLD)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub value: Option<f64>,
    pub evaluated: usize,
}

/// Share of answers covering at least 60% of their gold keyphrases. Records
/// without keyphrases are not counted.
pub fn response_accuracy<S: AsRef<str>>(answers: &[S], records: &[EvalRecord]) -> Result<Accuracy, EvalError> {
    check_len(answers.len(), records.len())?;
    let judged: Vec<bool> = answers
        .iter()
        .zip(records)
        .filter_map(|(a, r)| is_accurate(a.as_ref(), &r.gold_answer_keyphrases))
        .collect();
    let evaluated = judged.len();
    let value = (evaluated > 0).then(|| judged.iter().filter(|&&b| b).count() as f64 / evaluated as f64);
    Ok(Accuracy { value, evaluated })
}

/// Harmonic mean `2PR / (P + R)`.
pub fn f1(precision: f64, recall: f64) -> Result<f64, EvalError> {
    if !(0.0..=1.0).contains(&precision) || !(0.0..=1.0).contains(&recall) {
        return Err(EvalError::OutOfRange);
    }
    if precision + recall == 0.0 {
        return Err(EvalError::UndefinedF1);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDistribution {
    pub total: usize,
    pub counts: BTreeMap<ErrorCategory, usize>,
    /// `count / total * 100`; empty when there are no failures.
    pub percentages: BTreeMap<ErrorCategory, f64>,
}

pub fn error_distribution(failures: &[ErrorCategory]) -> ErrorDistribution {
    let mut counts: BTreeMap<ErrorCategory, usize> = ErrorCategory::ALL.iter().map(|&c| (c, 0)).collect();
    for f in failures {
        *counts.entry(*f).or_default() += 1;
    }
    let total = failures.len();
    let percentages = if total == 0 {
        BTreeMap::new()
    } else {
        counts.iter().map(|(&c, &n)| (c, n as f64 * 100.0 / total as f64)).collect()
    };
    ErrorDistribution { total, counts, percentages }
}

impl ErrorDistribution {
    /// Integer percentages summing to exactly 100 (largest-remainder
    /// rounding); empty when there are no failures.
    pub fn rounded(&self) -> BTreeMap<ErrorCategory, u32> {
        if self.total == 0 {
            return BTreeMap::new();
        }
        let mut floors: Vec<(ErrorCategory, u32, f64)> = self
            .percentages
            .iter()
            .map(|(&c, &p)| {
                let f = libm::floor(p);
                (c, f as u32, p - f)
            })
            .collect();
        let assigned: u32 = floors.iter().map(|f| f.1).sum();
        let mut order: Vec<usize> = (0..floors.len()).collect();
        order.sort_by(|&a, &b| floors[b].2.total_cmp(&floors[a].2).then(a.cmp(&b)));
        for &i in order.iter().take(100u32.saturating_sub(assigned) as usize) {
            floors[i].1 += 1;
        }
        floors.into_iter().map(|(c, p, _)| (c, p)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub records: usize,
    pub domain_precision: PerDomain,
    pub domain_recall: PerDomain,
    pub retrieval_precision: PrecisionAtK,
    pub response_accuracy: Accuracy,
    /// F1 of macro precision and macro recall of domain classification.
    pub f1: Option<f64>,
    pub error_distribution: ErrorDistribution,
}

fn pct(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{:.0}%", v * 100.0),
        None => String::from("n/a"),
    }
}

fn table(out: &mut String, title: &str, head: (&str, &str), rows: &[(String, String)]) {
    let w0 = rows.iter().map(|r| r.0.len()).chain([head.0.len()]).max().unwrap_or(0);
    let w1 = rows.iter().map(|r| r.1.len()).chain([head.1.len()]).max().unwrap_or(0);
    let rule = format!("+-{}-+-{}-+", "-".repeat(w0), "-".repeat(w1));
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "{rule}");
    let _ = writeln!(out, "| {:<w0$} | {:>w1$} |", head.0, head.1);
    let _ = writeln!(out, "{rule}");
    for (a, b) in rows {
        let _ = writeln!(out, "| {a:<w0$} | {b:>w1$} |");
    }
    let _ = writeln!(out, "{rule}");
}

impl EvalReport {
    /// Plain-text rendering: headline metrics, per-domain precision, and the
    /// error category distribution.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let headline = [
            (String::from("Domain Classification Precision"), pct(self.domain_precision.macro_average)),
            (format!("RAG Retrieval Precision@{}", self.retrieval_precision.k), pct(self.retrieval_precision.value)),
            (String::from("Response Accuracy"), pct(self.response_accuracy.value)),
            (String::from("F1-Score"), self.f1.map_or(String::from("n/a"), |f| format!("{f:.2}"))),
        ];
        table(&mut out, "System Evaluation Results", ("Metric", "Score"), &headline);
        out.push('\n');
        let domains: Vec<_> = LAW_DOMAINS
            .iter()
            .chain([DomainLabel::OutOfDomain].iter())
            .map(|d| (String::from(d.as_str()), pct(self.domain_precision.per_domain.get(d).copied().flatten())))
            .collect();
        table(&mut out, "Domain-wise Classification Precision", ("Domain", "Precision"), &domains);
        out.push('\n');
        let rounded = self.error_distribution.rounded();
        let errors: Vec<_> = ErrorCategory::ALL
            .iter()
            .map(|c| {
                let v = rounded.get(c).map_or(String::from("n/a"), |p| format!("{p}%"));
                (String::from(c.display_name()), v)
            })
            .collect();
        table(&mut out, "Error Category Distribution", ("Error Type", "Percentage"), &errors);
        out
    }
}

/// What the pipeline produced for one eval record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub predicted_domain: DomainLabel,
    /// Ranked chunk ids, best first.
    pub retrieved: Vec<String>,
    pub answer: String,
}

impl Observation {
    /// Misclassified, or answered without enough gold keyphrases.
    pub fn is_failure(&self, record: &EvalRecord) -> bool {
        self.predicted_domain != record.gold_domain
            || is_accurate(&self.answer, &record.gold_answer_keyphrases) == Some(false)
    }
}

/// Aggregate observations into a report. Failures contribute to the error
/// distribution only when their record names a gold error category.
pub fn build_report(records: &[EvalRecord], observations: &[Observation], k: usize) -> Result<EvalReport, EvalError> {
    check_len(records.len(), observations.len())?;
    let preds: Vec<DomainLabel> = observations.iter().map(|o| o.predicted_domain).collect();
    let golds: Vec<DomainLabel> = records.iter().map(|r| r.gold_domain).collect();
    let domain_precision = domain_precision(&preds, &golds)?;
    let domain_recall = domain_recall(&preds, &golds)?;
    let results: Vec<Vec<String>> = observations.iter().map(|o| o.retrieved.clone()).collect();
    let relevant: Vec<BTreeSet<String>> = records.iter().map(|r| r.relevant_chunk_ids.clone()).collect();
    let retrieval_precision = retrieval_precision_at_k(&results, &relevant, k)?;
    let answers: Vec<&str> = observations.iter().map(|o| o.answer.as_str()).collect();
    let response_accuracy = response_accuracy(&answers, records)?;
    let f1 = match (domain_precision.macro_average, domain_recall.macro_average) {
        (Some(p), Some(r)) => f1(p, r).ok(),
        _ => None,
    };
    let failures: Vec<ErrorCategory> = records
        .iter()
        .zip(observations)
        .filter(|(r, o)| o.is_failure(r))
        .filter_map(|(r, _)| r.error_category_gold)
        .collect();
    Ok(EvalReport {
        records: records.len(),
        domain_precision,
        domain_recall,
        retrieval_precision,
        response_accuracy,
        f1,
        error_distribution: error_distribution(&failures),
    })
}
