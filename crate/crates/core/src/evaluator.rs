//! Filtered ranking of held-out answers and per-type MRR.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::dataset::{DatasetQuery, Split};
use crate::error::{QueryError, Result};
use crate::ids::EntityId;
use crate::query::{self, CompiledQuery, QueryType};
use crate::store::EmbeddingStore;

/// Rank of one answer of one query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankingResult {
    pub query: usize,
    pub answer: EntityId,
    pub rank: usize,
    pub reciprocal: f64,
}

impl RankingResult {
    fn new(query: usize, answer: EntityId, rank: usize) -> Self {
        Self { query, answer, rank, reciprocal: 1.0 / rank as f64 }
    }
}

/// Scores every entity's answer point against the compiled query.
pub fn score_all(cq: &CompiledQuery, store: &EmbeddingStore) -> Vec<f64> {
    let s = store.scoring();
    (0..store.num_entities() as u32)
        .map(|e| query::score(cq, store.answer(EntityId(e)), s.alpha, s.lambda))
        .collect()
}

/// `(score, id)` of `u` beats `v`: strictly smaller score, or equal score and smaller id.
fn beats(scores: &[f64], u: usize, v: usize) -> bool {
    scores[u] < scores[v] || (scores[u] == scores[v] && u < v)
}

/// Filtered rank of `v` among all entities given precomputed scores.
pub fn rank_from_scores(scores: &[f64], v: EntityId, filter: &BTreeSet<EntityId>) -> Result<usize> {
    if filter.contains(&v) {
        return Err(QueryError::Malformed(format!("ranked answer {v} is in its own filter set")).into());
    }
    let vi = v.index();
    Ok(1 + (0..scores.len())
        .filter(|&u| u != vi && !filter.contains(&EntityId(u as u32)) && beats(scores, u, vi))
        .count())
}

/// Filtered rank of `v` for a compiled query; lower score ranks higher.
pub fn rank_answer(cq: &CompiledQuery, v: EntityId, store: &EmbeddingStore, filter: &BTreeSet<EntityId>) -> Result<usize> {
    rank_from_scores(&score_all(cq, store), v, filter)
}

/// Ranks every answer in `hard` with the other members of `known` filtered out.
pub fn rank_hard_answers(scores: &[f64], hard: &BTreeSet<EntityId>, known: &BTreeSet<EntityId>) -> Vec<usize> {
    let mut candidates: Vec<usize> = (0..scores.len()).filter(|&u| !known.contains(&EntityId(u as u32))).collect();
    candidates.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    hard.iter()
        .map(|v| {
            let vi = v.index();
            1 + candidates.partition_point(|&u| beats(scores, u, vi))
        })
        .collect()
}

/// Mean of 1/rank.
pub fn mean_reciprocal_rank(ranks: &[usize]) -> Option<f64> {
    if ranks.is_empty() {
        return None;
    }
    Some(ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / ranks.len() as f64)
}

/// Expected reciprocal rank of a uniformly random ranking of `n` candidates: `H_n / n`.
pub fn random_baseline_mrr(n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (1..=n).map(|k| 1.0 / k as f64).sum::<f64>() / n as f64
}

/// MRR scaled by 100 with one decimal.
pub fn format_mrr(mrr: f64) -> String {
    format!("{:.1}", mrr * 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeMetrics {
    pub mrr: f64,
    pub n_queries: usize,
    /// Mean random-ranking MRR over the same answers and filters.
    pub baseline: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub split: Split,
    pub per_type: BTreeMap<QueryType, TypeMetrics>,
    pub rankings: Vec<RankingResult>,
}

impl EvalReport {
    /// Unweighted mean of per-type MRR.
    pub fn mean_mrr(&self) -> f64 {
        if self.per_type.is_empty() {
            return 0.0;
        }
        self.per_type.values().map(|m| m.mrr).sum::<f64>() / self.per_type.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("type,mrr,n_queries\n");
        for (t, m) in &self.per_type {
            out.push_str(&format!("{t},{},{}\n", format_mrr(m.mrr), m.n_queries));
        }
        out
    }

    pub fn summary_json(&self) -> serde_json::Value {
        let per_type: BTreeMap<String, serde_json::Value> = self
            .per_type
            .iter()
            .map(|(t, m)| {
                (
                    t.to_string(),
                    serde_json::json!({"mrr": m.mrr, "n_queries": m.n_queries, "random_baseline": m.baseline}),
                )
            })
            .collect();
        serde_json::json!({
            "split": self.split.as_str(),
            "mean_mrr": self.mean_mrr(),
            "per_type": per_type,
        })
    }
}

/// Evaluates `queries` on `split`: each query's answers new to that split are
/// ranked against all entities with its other known answers filtered.
/// Queries without such answers are skipped.
pub fn evaluate(store: &EmbeddingStore, queries: &[DatasetQuery], split: Split) -> Result<EvalReport> {
    let mut sums: BTreeMap<QueryType, (f64, f64, usize)> = BTreeMap::new();
    let mut rankings = Vec::new();
    for (qi, q) in queries.iter().enumerate() {
        let hard = q.answers.hard(split);
        if hard.is_empty() {
            continue;
        }
        let known = q.answers.get(split);
        let cq = query::compile(&q.rewritten, store)?;
        let scores = score_all(&cq, store);
        let ranks = rank_hard_answers(&scores, &hard, known);
        for (&v, &r) in hard.iter().zip(&ranks) {
            rankings.push(RankingResult::new(qi, v, r));
        }
        let candidates = store.num_entities() - known.len() + 1;
        let entry = sums.entry(q.query_type()).or_insert((0.0, 0.0, 0));
        entry.0 += mean_reciprocal_rank(&ranks).expect("non-empty");
        entry.1 += random_baseline_mrr(candidates);
        entry.2 += 1;
    }
    let per_type = sums
        .into_iter()
        .map(|(t, (mrr, base, n))| (t, TypeMetrics { mrr: mrr / n as f64, n_queries: n, baseline: base / n as f64 }))
        .collect();
    Ok(EvalReport { split, per_type, rankings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(v: &[u32]) -> BTreeSet<EntityId> {
        v.iter().map(|&e| EntityId(e)).collect()
    }

    #[test]
    fn rank_examples() {
        let scores = [0.5, 0.1, 0.9, 0.7];
        assert_eq!(rank_from_scores(&scores, EntityId(1), &BTreeSet::new()).unwrap(), 1);
        let scores = [0.1, 0.2, 0.3, 0.9];
        assert_eq!(rank_from_scores(&scores, EntityId(3), &BTreeSet::new()).unwrap(), 4);
        let scores = [0.4, 0.4, 0.9];
        assert_eq!(rank_from_scores(&scores, EntityId(1), &BTreeSet::new()).unwrap(), 2);
        assert_eq!(rank_from_scores(&scores, EntityId(0), &BTreeSet::new()).unwrap(), 1);
        assert!(rank_from_scores(&scores, EntityId(0), &ids(&[0])).is_err());
    }

    #[test]
    fn mrr_examples() {
        assert_eq!(mean_reciprocal_rank(&[1]), Some(1.0));
        assert_eq!(format_mrr(1.0), "100.0");
        assert!((mean_reciprocal_rank(&[1, 2, 4]).unwrap() - 0.583_333).abs() < 1e-6);
        assert_eq!(mean_reciprocal_rank(&[]), None);
        assert!((random_baseline_mrr(1) - 1.0).abs() < 1e-15);
        assert!((random_baseline_mrr(4) - (1.0 + 0.5 + 1.0 / 3.0 + 0.25) / 4.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn fast_ranks_match_definition(scores in prop::collection::vec(0u8..6, 2..20), seed in 0u64..1000) {
            let scores: Vec<f64> = scores.into_iter().map(f64::from).collect();
            let n = scores.len() as u32;
            let known: BTreeSet<EntityId> = (0..n).filter(|e| (seed >> (e % 60)) & 1 == 1).map(EntityId).collect();
            for &v in &known {
                let mut filter = known.clone();
                filter.remove(&v);
                let slow = rank_from_scores(&scores, v, &filter).unwrap();
                let fast = rank_hard_answers(&scores, &BTreeSet::from([v]), &known)[0];
                prop_assert_eq!(slow, fast);
            }
        }

        #[test]
        fn rank_invariant_under_monotone_transform(scores in prop::collection::vec(-5.0f64..5.0, 2..20), v in 0usize..20) {
            let v = EntityId((v % scores.len()) as u32);
            let mapped: Vec<f64> = scores.iter().map(|s| s.exp() * 3.0 + 1.0).collect();
            prop_assert_eq!(
                rank_from_scores(&scores, v, &BTreeSet::new()).unwrap(),
                rank_from_scores(&mapped, v, &BTreeSet::new()).unwrap()
            );
        }

        #[test]
        fn filtering_never_worsens_rank(scores in prop::collection::vec(-5.0f64..5.0, 3..20), v in 0usize..20, extra in 0usize..20) {
            let n = scores.len();
            let v = EntityId((v % n) as u32);
            let extra = EntityId((extra % n) as u32);
            prop_assume!(extra != v);
            let before = rank_from_scores(&scores, v, &BTreeSet::new()).unwrap();
            let after = rank_from_scores(&scores, v, &BTreeSet::from([extra])).unwrap();
            prop_assert!(after <= before);
        }
    }
}
