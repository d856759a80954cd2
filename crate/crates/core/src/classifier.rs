//! Legal-domain classification of user queries.
//!
//! Each of the five law domains gets a hybrid score
//!
//! ```text
//! score(d) = w_lex * lexicon(d) + w_emb * max(0, cos(query, centroid(d)))
//! ```
//!
//! where `lexicon(d)` sums the weights of the domain's lexicon terms that
//! occur in the query (case-insensitive, word-boundary match, each term
//! counted once). The label is the highest-scoring domain when that score
//! reaches the threshold, otherwise `out_of_domain`. Equal scores resolve in
//! the fixed order constitutional, criminal, civil, family, corporate.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingVector;
use crate::text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainLabel {
    Constitutional,
    Criminal,
    Civil,
    Family,
    Corporate,
    OutOfDomain,
}

/// The five law domains in tie-break order.
pub const LAW_DOMAINS: [DomainLabel; 5] = [
    DomainLabel::Constitutional,
    DomainLabel::Criminal,
    DomainLabel::Civil,
    DomainLabel::Family,
    DomainLabel::Corporate,
];

impl DomainLabel {
    pub const ALL: [DomainLabel; 6] = [
        DomainLabel::Constitutional,
        DomainLabel::Criminal,
        DomainLabel::Civil,
        DomainLabel::Family,
        DomainLabel::Corporate,
        DomainLabel::OutOfDomain,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Constitutional => "constitutional",
            Self::Criminal => "criminal",
            Self::Civil => "civil",
            Self::Family => "family",
            Self::Corporate => "corporate",
            Self::OutOfDomain => "out_of_domain",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.as_str() == s)
    }

    pub fn is_law_domain(self) -> bool {
        self != Self::OutOfDomain
    }
}

impl fmt::Display for DomainLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClassifierError {
    #[error("query is empty")]
    EmptyQuery,
    #[error("lexicon line {line}: {reason}")]
    BadLexicon { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub domain: DomainLabel,
    pub term: String,
    pub weight: f64,
}

/// Weighted domain terms.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
}

impl Lexicon {
    pub fn new(entries: Vec<LexiconEntry>) -> Result<Self, ClassifierError> {
        for (i, e) in entries.iter().enumerate() {
            check_entry(e, i + 1)?;
        }
        Ok(Self { entries })
    }

    /// Parse line-delimited `{domain, term, weight}` records. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn from_jsonl(src: &str) -> Result<Self, ClassifierError> {
        let mut entries = Vec::new();
        for (i, raw) in src.lines().enumerate() {
            let raw = raw.trim();
            if raw.is_empty() || raw.starts_with('#') {
                continue;
            }
            let e: LexiconEntry = serde_json::from_str(raw)
                .map_err(|err| ClassifierError::BadLexicon { line: i + 1, reason: err.to_string() })?;
            check_entry(&e, i + 1)?;
            entries.push(LexiconEntry { term: e.term.trim().to_lowercase(), ..e });
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn terms_for(&self, domain: DomainLabel) -> impl Iterator<Item = &LexiconEntry> {
        self.entries.iter().filter(move |e| e.domain == domain)
    }

    /// Sum of weights of matching terms, per law domain.
    pub fn score(&self, query: &str) -> BTreeMap<DomainLabel, f64> {
        let lower = query.to_lowercase();
        let mut scores: BTreeMap<DomainLabel, f64> = LAW_DOMAINS.iter().map(|&d| (d, 0.0)).collect();
        for e in &self.entries {
            if text::contains_word(&lower, &e.term) {
                *scores.entry(e.domain).or_insert(0.0) += e.weight;
            }
        }
        scores
    }
}

fn check_entry(e: &LexiconEntry, line: usize) -> Result<(), ClassifierError> {
    let bad = |reason: &str| Err(ClassifierError::BadLexicon { line, reason: reason.to_string() });
    if !e.domain.is_law_domain() {
        return bad("domain must be one of the five law domains");
    }
    if e.term.trim().is_empty() {
        return bad("empty term");
    }
    if !(e.weight.is_finite() && e.weight > 0.0) {
        return bad("weight must be positive and finite");
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub lexicon_weight: f64,
    pub embedding_weight: f64,
    pub threshold: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self { lexicon_weight: 0.5, embedding_weight: 0.5, threshold: 0.15 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: DomainLabel,
    /// One entry per law domain.
    pub scores: BTreeMap<DomainLabel, f64>,
    pub confidence: f64,
}

/// Highest score, ties to the earlier domain in [`LAW_DOMAINS`] order.
pub fn argmax_domain(scores: &BTreeMap<DomainLabel, f64>) -> (DomainLabel, f64) {
    let mut best = (LAW_DOMAINS[0], f64::NEG_INFINITY);
    for d in LAW_DOMAINS {
        let s = scores.get(&d).copied().unwrap_or(0.0);
        if s > best.1 {
            best = (d, s);
        }
    }
    best
}

/// Apply the threshold and confidence rules to a set of domain scores.
pub fn decide(scores: BTreeMap<DomainLabel, f64>, threshold: f64) -> Classification {
    let (top, max) = argmax_domain(&scores);
    let sum: f64 = LAW_DOMAINS.iter().map(|d| scores.get(d).copied().unwrap_or(0.0)).sum();
    let confidence = if sum > 0.0 { max / sum } else { 0.0 };
    let label = if max >= threshold && max > 0.0 { top } else { DomainLabel::OutOfDomain };
    Classification { label, scores, confidence }
}

/// Unit-normalized mean of each domain's vectors. Domains without any
/// vectors are omitted.
pub fn build_centroids<'a, I>(labeled: I) -> BTreeMap<DomainLabel, EmbeddingVector>
where
    I: IntoIterator<Item = (DomainLabel, &'a EmbeddingVector)>,
{
    let mut sums: BTreeMap<DomainLabel, (Vec<f64>, usize)> = BTreeMap::new();
    for (domain, v) in labeled {
        let (acc, n) = sums.entry(domain).or_insert_with(|| (alloc::vec![0.0; v.dimension()], 0));
        if acc.len() != v.dimension() {
            continue;
        }
        for (a, x) in acc.iter_mut().zip(v.as_slice()) {
            *a += *x as f64;
        }
        *n += 1;
    }
    sums.into_iter()
        .filter_map(|(d, (acc, n))| {
            let mean = acc.into_iter().map(|a| a / n as f64).collect();
            // opposite vectors can cancel to zero; such a domain has no direction
            EmbeddingVector::normalized_f64(mean).ok().map(|c| (d, c))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    lexicon: Lexicon,
    centroids: BTreeMap<DomainLabel, EmbeddingVector>,
    config: ClassifierConfig,
}

impl Classifier {
    pub fn new(lexicon: Lexicon, centroids: BTreeMap<DomainLabel, EmbeddingVector>, config: ClassifierConfig) -> Self {
        Self { lexicon, centroids, config }
    }

    /// A classifier that ignores embeddings entirely.
    pub fn lexicon_only(lexicon: Lexicon, config: ClassifierConfig) -> Self {
        Self::new(lexicon, BTreeMap::new(), config)
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn centroids(&self) -> &BTreeMap<DomainLabel, EmbeddingVector> {
        &self.centroids
    }

    pub fn config(&self) -> ClassifierConfig {
        self.config
    }

    pub fn with_centroids(&self, centroids: BTreeMap<DomainLabel, EmbeddingVector>) -> Self {
        Self { centroids, ..self.clone() }
    }

    /// Classify `query`. `query_embedding` feeds the centroid term; pass
    /// `None` (or build without centroids) for lexicon-only scoring.
    pub fn classify(&self, query: &str, query_embedding: Option<&EmbeddingVector>) -> Result<Classification, ClassifierError> {
        if query.trim().is_empty() {
            return Err(ClassifierError::EmptyQuery);
        }
        let lex = self.lexicon.score(query);
        let mut scores = BTreeMap::new();
        for d in LAW_DOMAINS {
            let mut s = self.config.lexicon_weight * lex.get(&d).copied().unwrap_or(0.0);
            if let (Some(q), Some(c)) = (query_embedding, self.centroids.get(&d)) {
                if q.dimension() == c.dimension() {
                    s += self.config.embedding_weight * q.dot(c).max(0.0);
                }
            }
            scores.insert(d, s);
        }
        Ok(decide(scores, self.config.threshold))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn lex() -> Lexicon {
        Lexicon::from_jsonl(
            r#"{"domain":"criminal","term":"theft","weight":1.0}
{"domain":"criminal","term":"IPC","weight":0.8}
# comment
{"domain":"constitutional","term":"fundamental rights","weight":1.0}
{"domain":"constitutional","term":"article","weight":0.6}
"#,
        )
        .unwrap()
    }

    #[test]
    fn lexicon_only_labels() {
        let c = Classifier::lexicon_only(lex(), ClassifierConfig::default());
        let r = c.classify("What is the punishment for theft under the IPC?", None).unwrap();
        assert_eq!(r.label, DomainLabel::Criminal);
        assert!((r.scores[&DomainLabel::Criminal] - 0.9).abs() < 1e-12);
        assert!((r.confidence - 1.0).abs() < 1e-12);
        let r = c.classify("fundamental rights under Article 21", None).unwrap();
        assert_eq!(r.label, DomainLabel::Constitutional);
    }

    #[test]
    fn zero_scores_are_out_of_domain() {
        let c = Classifier::lexicon_only(lex(), ClassifierConfig::default());
        let r = c.classify("best biryani recipe", None).unwrap();
        assert_eq!(r.label, DomainLabel::OutOfDomain);
        assert_eq!(r.confidence, 0.0);
        assert_eq!(r.scores.len(), 5);
    }

    #[test]
    fn empty_query_rejected() {
        let c = Classifier::lexicon_only(lex(), ClassifierConfig::default());
        assert_eq!(c.classify("  ", None), Err(ClassifierError::EmptyQuery));
    }

    #[test]
    fn below_threshold_is_out_of_domain() {
        let mut scores: BTreeMap<_, _> = LAW_DOMAINS.iter().map(|&d| (d, 0.0)).collect();
        scores.insert(DomainLabel::Civil, 0.1);
        let c = decide(scores, 0.15);
        assert_eq!(c.label, DomainLabel::OutOfDomain);
        assert!((c.confidence - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ties_follow_domain_order() {
        let scores: BTreeMap<_, _> = [(DomainLabel::Corporate, 1.0), (DomainLabel::Criminal, 1.0)].into_iter().collect();
        assert_eq!(argmax_domain(&scores).0, DomainLabel::Criminal);
    }

    #[test]
    fn bad_lexicon_lines() {
        assert!(matches!(
            Lexicon::from_jsonl(r#"{"domain":"out_of_domain","term":"x","weight":1}"#),
            Err(ClassifierError::BadLexicon { line: 1, .. })
        ));
        assert!(Lexicon::from_jsonl("\n{\"domain\":\"civil\",\"term\":\"x\",\"weight\":0}").is_err());
        assert!(Lexicon::from_jsonl("nope").is_err());
    }

    #[test]
    fn centroid_cases() {
        let a = EmbeddingVector::normalized(vec![1.0, 0.0]).unwrap();
        let b = EmbeddingVector::normalized(vec![0.0, 1.0]).unwrap();
        let one = build_centroids([(DomainLabel::Civil, &a)]);
        assert_eq!(one[&DomainLabel::Civil], a);
        let same = build_centroids([(DomainLabel::Civil, &a), (DomainLabel::Civil, &a)]);
        assert_eq!(same[&DomainLabel::Civil], a);
        // mean of (1,0) and (0,1) is (0.5,0.5); normalized to (1/sqrt2, 1/sqrt2)
        let orth = build_centroids([(DomainLabel::Family, &a), (DomainLabel::Family, &b)]);
        let c = orth[&DomainLabel::Family].as_slice();
        let inv_sqrt2 = core::f64::consts::FRAC_1_SQRT_2;
        assert!((c[0] as f64 - inv_sqrt2).abs() < 1e-7 && (c[1] as f64 - inv_sqrt2).abs() < 1e-7);
        assert!(build_centroids(core::iter::empty()).is_empty());
    }

    #[test]
    fn centroid_term_contributes() {
        let v = EmbeddingVector::normalized(vec![1.0, 0.0]).unwrap();
        let centroids = [(DomainLabel::Family, v.clone())].into_iter().collect();
        let c = Classifier::new(Lexicon::default(), centroids, ClassifierConfig::default());
        let r = c.classify("anything", Some(&v)).unwrap();
        assert_eq!(r.label, DomainLabel::Family);
        assert!((r.scores[&DomainLabel::Family] - 0.5).abs() < 1e-6);
        let neg = EmbeddingVector::normalized(vec![-1.0, 0.0]).unwrap();
        let r = c.classify("anything", Some(&neg)).unwrap();
        assert_eq!(r.label, DomainLabel::OutOfDomain);
    }

    proptest! {
        #[test]
        fn argmax_and_confidence_scale_invariant(
            raw in proptest::array::uniform5(0.0f64..10.0),
            c in 1e-3f64..1e3,
        ) {
            let scores: BTreeMap<_, _> = LAW_DOMAINS.iter().copied().zip(raw).collect();
            let scaled: BTreeMap<_, _> = scores.iter().map(|(&d, &s)| (d, s * c)).collect();
            prop_assert_eq!(argmax_domain(&scores).0, argmax_domain(&scaled).0);
            let a = decide(scores, 0.0);
            let b = decide(scaled, 0.0);
            prop_assert_eq!(a.label, b.label);
            prop_assert!((a.confidence - b.confidence).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&a.confidence));
        }
    }
}
