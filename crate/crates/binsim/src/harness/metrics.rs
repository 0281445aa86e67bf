//! Evaluation metrics: pairwise AUC-ROC and the function-search protocol
//! (precision@1 and MRR).

use crate::error::{Error, Result};
use crate::harness::store::SearchQuery;
use serde::{Deserialize, Serialize};

/// AUC-ROC by exhaustive rank statistic: the fraction of (positive,
/// negative) score pairs ordered correctly, ties counted half.
pub fn eval_auc(scored: &[(f64, u8)]) -> Result<f64> {
    let pos: Vec<f64> = scored
        .iter()
        .filter(|(_, l)| *l == 1)
        .map(|(s, _)| *s)
        .collect();
    let neg: Vec<f64> = scored
        .iter()
        .filter(|(_, l)| *l == 0)
        .map(|(s, _)| *s)
        .collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::SingleClass);
    }
    if let Some((s, l)) = scored.iter().find(|(_, l)| *l > 1) {
        let _ = s;
        return Err(Error::BadLabel(*l as i64));
    }
    let mut wins = 0.0f64;
    for &p in &pos {
        for &n in &neg {
            if p > n {
                wins += 1.0;
            } else if p == n {
                wins += 0.5;
            }
        }
    }
    Ok(wins / (pos.len() as f64 * neg.len() as f64))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct QueryRank {
    pub query: String,
    /// 1-based rank of the positive candidate.
    pub rank: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SearchMetrics {
    pub precision_at_1: f64,
    pub mrr: f64,
    pub per_query: Vec<QueryRank>,
}

/// Rank each query's candidates by score (descending, ties broken by
/// candidate id ascending) and aggregate precision@1 and MRR.
pub fn eval_search<F>(queries: &[SearchQuery], mut score: F) -> Result<SearchMetrics>
where
    F: FnMut(&str, &str) -> Result<f64>,
{
    let mut per_query = Vec::with_capacity(queries.len());
    let mut hits = 0usize;
    let mut reciprocal_sum = 0.0f64;
    for q in queries {
        q.validate()?;
        let mut candidates: Vec<(&str, f64)> = Vec::with_capacity(1 + q.negative_ids.len());
        candidates.push((q.positive_id.as_str(), score(&q.query_id, &q.positive_id)?));
        for n in &q.negative_ids {
            candidates.push((n.as_str(), score(&q.query_id, n)?));
        }
        candidates.sort_by(|(id_a, s_a), (id_b, s_b)| {
            s_b.partial_cmp(s_a)
                .expect("finite scores")
                .then_with(|| id_a.cmp(id_b))
        });
        let rank = candidates
            .iter()
            .position(|(id, _)| *id == q.positive_id)
            .expect("positive is among candidates")
            + 1;
        if rank == 1 {
            hits += 1;
        }
        reciprocal_sum += 1.0 / rank as f64;
        per_query.push(QueryRank {
            query: q.query_id.clone(),
            rank,
        });
    }
    let n = queries.len() as f64;
    Ok(SearchMetrics {
        precision_at_1: hits as f64 / n,
        mrr: reciprocal_sum / n,
        per_query,
    })
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct Timing {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_seconds_per_epoch: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predict_ms_per_pair: Option<f64>,
}

/// Aggregated evaluation results; serialized to stdout or a report file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EvalReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_at_1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mrr: Option<f64>,
    pub n_queries: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_query: Vec<QueryRank>,
    pub timing: Timing,
}

impl EvalReport {
    /// MRR >= precision@1 must hold: per query 1/rank >= [rank == 1].
    pub fn check_invariants(&self) -> Result<()> {
        if let (Some(mrr), Some(p1)) = (self.mrr, self.p_at_1) {
            if mrr + 1e-12 < p1 {
                return Err(Error::Config(format!(
                    "MRR {mrr} below precision@1 {p1}"
                )));
            }
        }
        Ok(())
    }
}
