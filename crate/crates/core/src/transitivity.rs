//! Chains of a transitive relation and how well their order survives on the
//! relation's reserved coordinate.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::warn;
use serde::Serialize;

use crate::dataset::Triple;
use crate::error::StoreError;
use crate::geometry::TransitiveSlot;
use crate::ids::{EntityId, RelationId};
use crate::store::EmbeddingStore;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Chain {
    pub relation: RelationId,
    pub entities: Vec<EntityId>,
}

/// All maximal root-to-leaf paths of `relation`'s edges, depth-first from
/// nodes without incoming edges. Nodes only reachable through cycles are
/// started from in ascending id order; a path stops before revisiting a node.
pub fn extract_chains(triples: &[Triple], relation: RelationId) -> Vec<Chain> {
    let mut adj: BTreeMap<EntityId, BTreeSet<EntityId>> = BTreeMap::new();
    let mut has_incoming = BTreeSet::new();
    for t in triples.iter().filter(|t| t.relation == relation) {
        adj.entry(t.head).or_default().insert(t.tail);
        has_incoming.insert(t.tail);
    }
    let mut chains = Vec::new();
    let mut visited = BTreeSet::new();
    let mut truncated = 0usize;
    let roots: Vec<EntityId> = adj.keys().filter(|e| !has_incoming.contains(e)).copied().collect();
    let mut walk = |start: EntityId, visited: &mut BTreeSet<EntityId>, chains: &mut Vec<Chain>| {
        let mut path = vec![start];
        dfs(&adj, &mut path, visited, &mut |p: &[EntityId], cut: bool| {
            truncated += cut as usize;
            chains.push(Chain { relation, entities: p.to_vec() });
        });
    };
    for r in roots {
        walk(r, &mut visited, &mut chains);
    }
    let rest: Vec<EntityId> = adj.keys().copied().collect();
    for e in rest {
        if !visited.contains(&e) {
            walk(e, &mut visited, &mut chains);
        }
    }
    if truncated > 0 {
        warn!("relation {relation}: {truncated} chains truncated at a cycle");
    }
    chains
}

fn dfs(
    adj: &BTreeMap<EntityId, BTreeSet<EntityId>>,
    path: &mut Vec<EntityId>,
    visited: &mut BTreeSet<EntityId>,
    emit: &mut dyn FnMut(&[EntityId], bool),
) {
    let u = *path.last().expect("non-empty path");
    visited.insert(u);
    match adj.get(&u) {
        None => emit(path, false),
        Some(next) => {
            for &v in next {
                if path.contains(&v) {
                    emit(path, true);
                } else {
                    path.push(v);
                    dfs(adj, path, visited, emit);
                    path.pop();
                }
            }
        }
    }
}

/// Average ranks, with ties sharing the mean of their positions (1-based).
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman correlation: Pearson correlation of fractional ranks; 0 when
/// either side is constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let (rx, ry) = (fractional_ranks(xs), fractional_ranks(ys));
    let n = xs.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}

fn slot_of(store: &EmbeddingStore, relation: RelationId) -> Result<TransitiveSlot, StoreError> {
    store.transitive_slot(relation).ok_or(StoreError::NotTransitive(relation))
}

fn chain_values(store: &EmbeddingStore, chain: &Chain, slot: TransitiveSlot) -> Vec<f64> {
    chain.entities.iter().map(|&e| store.answer(e)[slot.dim]).collect()
}

/// Correlation of one chain's answer values with its expected order:
/// decreasing along the chain, or increasing for the inverse form.
pub fn chain_correlation(values: &[f64], inverse: bool) -> f64 {
    let expected: Vec<f64> =
        (0..values.len()).map(|j| if inverse { j as f64 } else { -(j as f64) }).collect();
    spearman(&expected, values)
}

/// Mean chain correlation over chains with at least two entities; `None` when there are none.
pub fn spearman_chain_score(chains: &[Chain], store: &EmbeddingStore, relation: RelationId) -> Result<Option<f64>, StoreError> {
    let slot = slot_of(store, relation)?;
    let scores: Vec<f64> = chains
        .iter()
        .filter(|c| c.entities.len() >= 2)
        .map(|c| chain_correlation(&chain_values(store, c, slot), slot.inverse))
        .collect();
    if scores.is_empty() {
        return Ok(None);
    }
    Ok(Some(scores.iter().sum::<f64>() / scores.len() as f64))
}

/// CSV of chain positions and whether each link keeps the expected strict
/// order; the last row of a chain repeats its incoming link.
pub fn chain_preservation_csv(chains: &[Chain], store: &EmbeddingStore, relation: RelationId) -> Result<String, StoreError> {
    let slot = slot_of(store, relation)?;
    let mut out = String::from("chain_id,position,entity,value,preserved\n");
    for (id, chain) in chains.iter().enumerate() {
        let values = chain_values(store, chain, slot);
        let kept = |j: usize| {
            let (a, b) = (values[j], values[j + 1]);
            if slot.inverse {
                a < b
            } else {
                a > b
            }
        };
        for (j, (&e, &v)) in chain.entities.iter().zip(&values).enumerate() {
            let link = if j + 1 < values.len() { j } else { j.saturating_sub(1) };
            let preserved = values.len() >= 2 && kept(link);
            writeln!(out, "{id},{j},{},{v},{}", e.0, preserved as u8).expect("string write");
        }
    }
    Ok(out)
}

pub fn chain_preservation_report(chains: &[Chain], store: &EmbeddingStore, relation: RelationId, path: &Path) -> Result<(), StoreError> {
    let csv = chain_preservation_csv(chains, store, relation)?;
    fs::write(path, csv)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainSummary {
    pub relation: u32,
    pub n_chains: usize,
    pub spearman_mean: Option<f64>,
}
