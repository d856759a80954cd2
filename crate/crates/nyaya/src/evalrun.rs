//! Runs an eval dataset through the live pipeline.

use nyaya_core::evals::{build_report, EvalError, EvalRecord, EvalReport, Observation};

use crate::engine::{Engine, EngineError};

#[derive(Debug, thiserror::Error)]
pub enum EvalRunError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Metrics(#[from] EvalError),
}

/// Answer every record against one knowledge-base snapshot with empty
/// history. Retrieval precision uses the raw top-`k` index hits.
pub async fn run(engine: &Engine, records: &[EvalRecord], k: usize) -> Result<EvalReport, EvalRunError> {
    if k == 0 {
        return Err(EvalError::ZeroK.into());
    }
    let kb = engine.snapshot();
    let mut observations = Vec::with_capacity(records.len());
    for (i, record) in records.iter().enumerate() {
        let answer = engine.answer_with(&kb, &record.query, &[], &format!("eval:{i}")).await?;
        let retrieved = match &answer.query_embedding {
            Some(v) => kb.index.search(v, k).map_err(EngineError::from)?.into_iter().map(|h| h.chunk_id).collect(),
            None => Vec::new(),
        };
        observations.push(Observation {
            predicted_domain: answer.classification().label,
            retrieved,
            answer: answer.verdict.final_text,
        });
    }
    Ok(build_report(records, &observations, k)?)
}
