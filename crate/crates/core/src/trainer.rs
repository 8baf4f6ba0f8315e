//! Negative-sampling margin loss, the identity regularizer on transitive
//! coordinates, the answer consistency term, reverse-mode gradients through
//! the box operators, and the Adam training loop.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write as _;
use std::path::Path;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Split};
use crate::error::{Result, TrainError};
use crate::evaluator;
use crate::geometry::{self, arg_best, BoxEmbedding, Corners, RelationEmbedding, TransitiveSlot};
use crate::ids::{EntityId, RelationId};
use crate::query::{self, Conjunctive, QueryDag};
use crate::store::{EmbeddingStore, ProjectionMode, ScoringConfig, StoreConfig, BLOCK_NAMES};

/// Training hyperparameters; every field has a default so config files may be partial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub alpha: f64,
    /// Loss margin; also scales the initialization range.
    pub gamma: f64,
    /// Ordering margin on transitive coordinates.
    pub lambda: f64,
    pub learning_rate: f64,
    pub dim: usize,
    pub negatives_k: usize,
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
    /// Separate answer points instead of answers tied to box centers.
    pub answer_embedding: bool,
    pub projection_mode: ProjectionMode,
    pub transitive_loss_enabled: bool,
    pub answer_consistency_weight: f64,
    pub log_interval: usize,
    /// Validation every this many steps; 0 disables.
    pub eval_interval: usize,
    /// Stop when validation MRR has not improved for this many steps; 0 disables.
    pub patience: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            gamma: 1.0,
            lambda: 0.1,
            learning_rate: 0.01,
            dim: 32,
            negatives_k: 16,
            batch_size: 64,
            steps: 1000,
            seed: 0,
            answer_embedding: false,
            projection_mode: ProjectionMode::Full,
            transitive_loss_enabled: true,
            answer_consistency_weight: 1.0,
            log_interval: 100,
            eval_interval: 0,
            patience: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> std::result::Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.into()));
        if !(self.gamma > 0.0) {
            return bad("gamma must be positive");
        }
        if !(self.lambda > 0.0) {
            return bad("lambda must be positive");
        }
        if !(self.alpha >= 0.0) {
            return bad("alpha must be non-negative");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.negatives_k == 0 {
            return bad("negatives_k must be at least 1");
        }
        if self.batch_size == 0 || self.dim == 0 {
            return bad("batch_size and dim must be positive");
        }
        if !(self.answer_consistency_weight >= 0.0) {
            return bad("answer_consistency_weight must be non-negative");
        }
        Ok(())
    }

    pub fn scoring(&self) -> ScoringConfig {
        ScoringConfig { alpha: self.alpha, lambda: self.lambda, transitive: self.transitive_loss_enabled }
    }

    pub fn store_config(&self) -> StoreConfig {
        StoreConfig {
            dim: self.dim,
            projection_mode: self.projection_mode,
            answer_embedding: self.answer_embedding,
            gamma: self.gamma,
            scoring: self.scoring(),
        }
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig { gamma: self.gamma, consistency_weight: self.answer_consistency_weight }
    }
}

/// Loss weights not carried by the store's scoring config.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub gamma: f64,
    pub consistency_weight: f64,
}

/// `ln σ(x)` without overflow.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `−ln σ(γ − d_pos) − (1/k) Σ ln σ(d_neg − γ)`.
pub fn margin_loss(positive: f64, negatives: &[f64], gamma: f64) -> f64 {
    let k = negatives.len() as f64;
    -log_sigmoid(gamma - positive) - negatives.iter().map(|&d| log_sigmoid(d - gamma)).sum::<f64>() / k
}

/// Margin loss of a compiled query against a positive and negative answer points.
pub fn loss(cq: &query::CompiledQuery, positive: &[f64], negatives: &[&[f64]], scoring: ScoringConfig, gamma: f64) -> f64 {
    let d = |a: &[f64]| query::score(cq, a, scoring.alpha, scoring.lambda);
    let neg: Vec<f64> = negatives.iter().map(|a| d(a)).collect();
    margin_loss(d(positive), &neg, gamma)
}

/// Identity regularizer on the transitive coordinate of `r`.
pub fn transitive_reg_loss(r: &RelationEmbedding, i: usize) -> std::result::Result<f64, TrainError> {
    match r.transitive {
        Some(slot) if slot.dim == i => {
            Ok((r.r1[i] - 1.0).abs() + (r.r3[i] - 1.0).abs() + r.r2[i].abs() + r.r4[i].abs())
        }
        _ => Err(TrainError::Config(format!("relation is not transitive on coordinate {i}"))),
    }
}

/// Distance from an entity's query box to its own answer point; 0 when tied.
pub fn answer_consistency_loss(e: EntityId, store: &EmbeddingStore, alpha: f64) -> f64 {
    if store.tied_answers() {
        return 0.0;
    }
    let b = store.entity_box(e).expect("entity in range");
    geometry::dist_box(&b, store.answer(e), alpha).expect("store dimensions agree")
}

/// Uniform draws with replacement from entities outside `exclusion`.
pub fn sample_negatives(
    rng: &mut ChaCha8Rng,
    k: usize,
    exclusion: &BTreeSet<EntityId>,
    num_entities: usize,
) -> std::result::Result<Vec<EntityId>, TrainError> {
    let excluded = exclusion.iter().filter(|e| e.index() < num_entities).count();
    if excluded >= num_entities {
        return Err(TrainError::Unsampleable);
    }
    if excluded * 2 > num_entities {
        let pool: Vec<EntityId> =
            (0..num_entities as u32).map(EntityId).filter(|e| !exclusion.contains(e)).collect();
        return Ok((0..k).map(|_| pool[rng.gen_range(0..pool.len())]).collect());
    }
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let e = EntityId(rng.gen_range(0..num_entities as u32));
        if !exclusion.contains(&e) {
            out.push(e);
        }
    }
    Ok(out)
}

/// Dense gradient buffers laid out like [`EmbeddingStore::blocks`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    blocks: [Vec<f64>; 4],
    dim: usize,
    tied: bool,
}

impl Gradients {
    pub fn zeros(store: &EmbeddingStore) -> Self {
        let blocks = store.blocks().map(|b| vec![0.0; b.len()]);
        Self { blocks, dim: store.dim(), tied: store.tied_answers() }
    }

    pub fn blocks(&self) -> &[Vec<f64>; 4] {
        &self.blocks
    }

    pub fn norm(&self) -> f64 {
        self.blocks.iter().flatten().map(|g| g * g).sum::<f64>().sqrt()
    }

    fn clear(&mut self) {
        for b in &mut self.blocks {
            b.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    fn row(&mut self, block: usize, e: EntityId) -> &mut [f64] {
        let d = self.dim;
        &mut self.blocks[block][e.index() * d..(e.index() + 1) * d]
    }

    fn answer(&mut self, e: EntityId) -> &mut [f64] {
        self.row(if self.tied { 0 } else { 2 }, e)
    }

    fn relation(&mut self, r: RelationId, k: usize) -> &mut [f64] {
        let d = self.dim;
        let start = (r.index() * 4 + k) * d;
        &mut self.blocks[3][start..start + d]
    }
}

enum Op {
    Anchor(EntityId),
    Projection { relation: RelationId, input: usize, pre: Vec<f64> },
    Intersection { inputs: Vec<usize>, lo_arg: Vec<usize>, hi_arg: Vec<usize> },
}

/// A recorded forward pass of one disjunct; children precede parents.
struct Tape {
    ops: Vec<Op>,
    centers: Vec<Vec<f64>>,
    offsets: Vec<Vec<f64>>,
    empty: Vec<bool>,
}

struct NodeView<'a> {
    center: &'a [f64],
    offset: &'a [f64],
}

impl Corners for NodeView<'_> {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn center_at(&self, i: usize) -> f64 {
        self.center[i]
    }
    fn offset_at(&self, i: usize) -> f64 {
        self.offset[i]
    }
}

impl Tape {
    fn record(tree: &Conjunctive, store: &EmbeddingStore) -> Result<Tape> {
        let mut tape = Tape { ops: Vec::new(), centers: Vec::new(), offsets: Vec::new(), empty: Vec::new() };
        tape.push_tree(tree, store)?;
        Ok(tape)
    }

    fn root(&self) -> usize {
        self.ops.len() - 1
    }

    fn push(&mut self, op: Op, center: Vec<f64>, offset: Vec<f64>, empty: bool) -> usize {
        self.ops.push(op);
        self.centers.push(center);
        self.offsets.push(offset);
        self.empty.push(empty);
        self.ops.len() - 1
    }

    fn push_tree(&mut self, tree: &Conjunctive, store: &EmbeddingStore) -> Result<usize> {
        let n = store.dim();
        Ok(match tree {
            Conjunctive::Anchor(e) => {
                let b = store.entity_box(*e).ok_or_else(|| crate::error::QueryError::UnknownEntity {
                    entity: *e,
                    node: "anchor".into(),
                })?;
                let (c, o) = b.into_parts();
                self.push(Op::Anchor(*e), c, o, false)
            }
            Conjunctive::Projection(r, child) => {
                if r.index() >= store.num_relations() {
                    return Err(crate::error::QueryError::UnknownRelation { relation: *r, node: "projection".into() }.into());
                }
                let input = self.push_tree(child, store)?;
                let input_empty = self.empty[input];
                let mut center = Vec::with_capacity(n);
                let mut pre = Vec::with_capacity(n);
                for i in 0..n {
                    let o_in = if input_empty { 0.0 } else { self.offsets[input][i] };
                    center.push(store.relation_component(*r, 0, i) * self.centers[input][i] + store.relation_component(*r, 1, i));
                    pre.push(store.relation_component(*r, 2, i) * o_in + store.relation_component(*r, 3, i));
                }
                let offset = pre.iter().map(|p| p.abs()).collect();
                self.push(Op::Projection { relation: *r, input, pre }, center, offset, false)
            }
            Conjunctive::Intersection(kids) => {
                let inputs = kids.iter().map(|k| self.push_tree(k, store)).collect::<Result<Vec<_>>>()?;
                let views: Vec<NodeView> = inputs
                    .iter()
                    .map(|&k| NodeView { center: &self.centers[k], offset: &self.offsets[k] })
                    .collect();
                let mut center = Vec::with_capacity(n);
                let mut offset = Vec::with_capacity(n);
                let mut lo_arg = Vec::with_capacity(n);
                let mut hi_arg = Vec::with_capacity(n);
                let mut empty = false;
                for i in 0..n {
                    let (la, lo) = arg_best(&views, |b| b.lower_at(i), |x, best| x > best);
                    let (ha, hi) = arg_best(&views, |b| b.upper_at(i), |x, best| x < best);
                    if la == ha {
                        center.push(views[la].center_at(i));
                        offset.push(views[la].offset_at(i));
                    } else {
                        center.push((lo + hi) / 2.0);
                        offset.push((hi - lo) / 2.0);
                    }
                    empty |= lo > hi;
                    lo_arg.push(inputs[la]);
                    hi_arg.push(inputs[ha]);
                }
                self.push(Op::Intersection { inputs, lo_arg, hi_arg }, center, offset, empty)
            }
        })
    }

    /// Propagates root gradients `(gc, go)` to the parameters.
    fn backward(&self, store: &EmbeddingStore, root_gc: Vec<f64>, root_go: Vec<f64>, grads: &mut Gradients) {
        let n = store.dim();
        let mode = store.projection_mode();
        let mut gc: Vec<Vec<f64>> = vec![Vec::new(); self.ops.len()];
        let mut go: Vec<Vec<f64>> = vec![Vec::new(); self.ops.len()];
        let root = self.root();
        gc[root] = root_gc;
        go[root] = root_go;
        for idx in (0..self.ops.len()).rev() {
            let g_c = std::mem::take(&mut gc[idx]);
            let g_o = std::mem::take(&mut go[idx]);
            if g_c.is_empty() {
                continue;
            }
            let ensure = |v: &mut Vec<Vec<f64>>, k: usize| {
                if v[k].is_empty() {
                    v[k] = vec![0.0; n];
                }
            };
            match &self.ops[idx] {
                Op::Anchor(e) => {
                    let raw = store.entity_offset_raw(*e);
                    let sign: Vec<f64> = raw.iter().map(|&x| if x < 0.0 { -1.0 } else { 1.0 }).collect();
                    add(grads.row(0, *e), &g_c);
                    for (g, (s, d)) in grads.row(1, *e).iter_mut().zip(sign.iter().zip(&g_o)) {
                        *g += s * d;
                    }
                }
                Op::Projection { relation, input, pre } => {
                    let r = *relation;
                    let input = *input;
                    let input_empty = self.empty[input];
                    ensure(&mut gc, input);
                    ensure(&mut go, input);
                    for i in 0..n {
                        let g_pre = if pre[i] < 0.0 { -g_o[i] } else { g_o[i] };
                        let c_in = self.centers[input][i];
                        let o_in = if input_empty { 0.0 } else { self.offsets[input][i] };
                        if mode.learns_scale() {
                            grads.relation(r, 0)[i] += c_in * g_c[i];
                            grads.relation(r, 2)[i] += o_in * g_pre;
                        }
                        if mode.learns_shift() {
                            grads.relation(r, 1)[i] += g_c[i];
                            grads.relation(r, 3)[i] += g_pre;
                        }
                        gc[input][i] += store.relation_component(r, 0, i) * g_c[i];
                        if !input_empty {
                            go[input][i] += store.relation_component(r, 2, i) * g_pre;
                        }
                    }
                }
                Op::Intersection { inputs, lo_arg, hi_arg } => {
                    for &k in inputs {
                        ensure(&mut gc, k);
                        ensure(&mut go, k);
                    }
                    for i in 0..n {
                        let (l, h) = (lo_arg[i], hi_arg[i]);
                        if l == h {
                            gc[l][i] += g_c[i];
                            go[l][i] += g_o[i];
                        } else {
                            let g_lo = (g_c[i] - g_o[i]) / 2.0;
                            let g_hi = (g_c[i] + g_o[i]) / 2.0;
                            gc[l][i] += g_lo;
                            go[l][i] -= g_lo;
                            gc[h][i] += g_hi;
                            go[h][i] += g_hi;
                        }
                    }
                }
            }
        }
    }
}

fn add(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Box or transitive distance from region `(c, o)` to point `a`; when `g` is
/// nonzero, accumulates `g * ∂d` into `gc`, `go` and `ga`.
#[allow(clippy::too_many_arguments)]
fn distance_with_grad(
    c: &[f64],
    o: &[f64],
    a: &[f64],
    slot: Option<TransitiveSlot>,
    scoring: ScoringConfig,
    g: f64,
    gc: &mut [f64],
    go: &mut [f64],
    ga: &mut [f64],
) -> f64 {
    let alpha = scoring.alpha;
    let mut out = 0.0;
    let mut inside = 0.0;
    for i in 0..a.len() {
        if slot.map_or(false, |s| s.dim == i) {
            continue;
        }
        let (lo, hi) = (c[i] - o[i], c[i] + o[i]);
        out += geometry::out_term(lo, hi, a[i]);
        inside += geometry::in_term(c[i], lo, hi, a[i]);
        if g == 0.0 {
            continue;
        }
        // outside violation
        if a[i] - hi > 0.0 {
            ga[i] += g;
            gc[i] -= g;
            go[i] -= g;
        }
        if lo - a[i] > 0.0 {
            gc[i] += g;
            go[i] -= g;
            ga[i] -= g;
        }
        // inside distance to the clamped point; ties resolve to the corner
        let m_is_lower = lo >= a[i];
        let m = if m_is_lower { lo } else { a[i] };
        let clamp_is_upper = hi <= m;
        let clamp = if clamp_is_upper { hi } else { m };
        let v = c[i] - clamp;
        let s = if v > 0.0 {
            alpha * g
        } else if v < 0.0 {
            -alpha * g
        } else {
            0.0
        };
        gc[i] += s;
        if clamp_is_upper {
            gc[i] -= s;
            go[i] -= s;
        } else if m_is_lower {
            gc[i] -= s;
            go[i] += s;
        } else {
            ga[i] -= s;
        }
    }
    let mut total = out + alpha * inside;
    if let Some(slot) = slot {
        let i = slot.dim;
        let ord = geometry::dist_ordering(c[i], a[i], scoring.lambda, slot.inverse);
        total = out + alpha * inside + ord;
        if g != 0.0 && ord > 0.0 {
            let sgn = if slot.inverse { -g } else { g };
            ga[i] += sgn;
            gc[i] -= sgn;
        }
    }
    total
}

/// One query of a micro-batch: its disjuncts, one positive and its negatives.
#[derive(Debug, Clone)]
pub struct BatchItem<'a> {
    pub dnf: &'a [Conjunctive],
    pub positive: EntityId,
    pub negatives: Vec<EntityId>,
}

/// Components of the batch objective.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LossTerms {
    pub query: f64,
    pub regularizer: f64,
    pub consistency: f64,
    pub total: f64,
}

fn reg_terms(store: &EmbeddingStore) -> Vec<(RelationId, usize)> {
    if !store.scoring().transitive {
        return Vec::new();
    }
    store.transitive_dims().iter().map(|(&r, s)| (r, s.dim)).collect()
}

/// Batch objective evaluated through the public compile and score path.
///
/// Mean query loss, plus the regularizer summed over every transitive
/// relation when transitive scoring is on, plus the weighted mean answer
/// consistency over the batch's positives.
pub fn batch_loss(store: &EmbeddingStore, items: &[BatchItem], cfg: &LossConfig) -> Result<LossTerms> {
    if items.is_empty() {
        return Err(TrainError::EmptyBatch.into());
    }
    let scoring = store.scoring();
    let mut q = 0.0;
    for item in items {
        let cq = query::compile_dnf(item.dnf, store)?;
        let negs: Vec<&[f64]> = item.negatives.iter().map(|&e| store.answer(e)).collect();
        q += loss(&cq, store.answer(item.positive), &negs, scoring, cfg.gamma);
    }
    let query = q / items.len() as f64;
    let mut regularizer = 0.0;
    for (r, i) in reg_terms(store) {
        regularizer += transitive_reg_loss(&store.relation(r).expect("known relation"), i)?;
    }
    let consistency = cfg.consistency_weight
        * items.iter().map(|it| answer_consistency_loss(it.positive, store, scoring.alpha)).sum::<f64>()
        / items.len() as f64;
    Ok(LossTerms { query, regularizer, consistency, total: query + regularizer + consistency })
}

/// Batch objective and its subgradient with respect to every parameter.
pub fn batch_gradients(store: &EmbeddingStore, items: &[BatchItem], cfg: &LossConfig) -> Result<(LossTerms, Gradients)> {
    let mut grads = Gradients::zeros(store);
    let terms = accumulate_gradients(store, items, cfg, &mut grads)?;
    Ok((terms, grads))
}

fn accumulate_gradients(store: &EmbeddingStore, items: &[BatchItem], cfg: &LossConfig, grads: &mut Gradients) -> Result<LossTerms> {
    if items.is_empty() {
        return Err(TrainError::EmptyBatch.into());
    }
    let n = store.dim();
    let scoring = store.scoring();
    let batch = items.len() as f64;
    let mut query_sum = 0.0;
    for item in items {
        let tapes = item
            .dnf
            .iter()
            .map(|t| {
                let slot = if scoring.transitive { t.final_relation().and_then(|r| store.transitive_slot(r)) } else { None };
                Ok((Tape::record(t, store)?, slot))
            })
            .collect::<Result<Vec<_>>>()?;
        if tapes.is_empty() {
            return Err(crate::error::QueryError::Malformed("query has no disjuncts".into()).into());
        }
        let mut scratch = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        // score = min over disjuncts; the first minimizer receives the gradient
        let best = |a: &[f64], scratch: &mut (Vec<f64>, Vec<f64>, Vec<f64>)| -> (usize, f64) {
            let mut best = (0, f64::INFINITY);
            for (k, (tape, slot)) in tapes.iter().enumerate() {
                let r = tape.root();
                let d = distance_with_grad(&tape.centers[r], &tape.offsets[r], a, *slot, scoring, 0.0, &mut scratch.0, &mut scratch.1, &mut scratch.2);
                if d < best.1 || k == 0 {
                    best = (k, d);
                }
            }
            best
        };
        let answers: Vec<EntityId> = std::iter::once(item.positive).chain(item.negatives.iter().copied()).collect();
        let mut chosen = Vec::with_capacity(answers.len());
        for &e in &answers {
            chosen.push(best(store.answer(e), &mut scratch));
        }
        let k = item.negatives.len() as f64;
        let neg_d: Vec<f64> = chosen[1..].iter().map(|c| c.1).collect();
        query_sum += margin_loss(chosen[0].1, &neg_d, cfg.gamma);

        let mut root_gc: Vec<Vec<f64>> = vec![vec![0.0; n]; tapes.len()];
        let mut root_go: Vec<Vec<f64>> = vec![vec![0.0; n]; tapes.len()];
        for (j, (&e, &(disj, d))) in answers.iter().zip(&chosen).enumerate() {
            let dl_dd = if j == 0 { sigmoid(d - cfg.gamma) } else { -sigmoid(cfg.gamma - d) / k } / batch;
            if dl_dd == 0.0 {
                continue;
            }
            let (tape, slot) = &tapes[disj];
            let r = tape.root();
            let mut ga = vec![0.0; n];
            distance_with_grad(
                &tape.centers[r],
                &tape.offsets[r],
                store.answer(e),
                *slot,
                scoring,
                dl_dd,
                &mut root_gc[disj],
                &mut root_go[disj],
                &mut ga,
            );
            add(grads.answer(e), &ga);
        }
        for ((tape, _), (gc, go)) in tapes.iter().zip(root_gc.into_iter().zip(root_go)) {
            tape.backward(store, gc, go, grads);
        }
    }

    let mut regularizer = 0.0;
    let mode = store.projection_mode();
    for (r, i) in reg_terms(store) {
        let targets = [1.0, 0.0, 1.0, 0.0];
        for (k, target) in targets.into_iter().enumerate() {
            let x = store.relation_component(r, k, i) - target;
            regularizer += x.abs();
            let learned = if k % 2 == 0 { mode.learns_scale() } else { mode.learns_shift() };
            if learned {
                grads.relation(r, k)[i] += if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                };
            }
        }
    }

    let mut consistency = 0.0;
    if !store.tied_answers() && cfg.consistency_weight > 0.0 {
        let w = cfg.consistency_weight / batch;
        for item in items {
            let e = item.positive;
            let b = store.entity_box(e).expect("entity in range");
            let mut gc = vec![0.0; n];
            let mut go = vec![0.0; n];
            let mut ga = vec![0.0; n];
            let no_slot = ScoringConfig { transitive: false, ..scoring };
            consistency += distance_with_grad(b.center(), b.offset(), store.answer(e), None, no_slot, w, &mut gc, &mut go, &mut ga);
            add(grads.answer(e), &ga);
            add(grads.row(0, e), &gc);
            let raw = store.entity_offset_raw(e).to_vec();
            for (g, (x, d)) in grads.row(1, e).iter_mut().zip(raw.iter().zip(&go)) {
                *g += if *x < 0.0 { -d } else { *d };
            }
        }
        consistency *= cfg.consistency_weight / batch;
    }
    let query = query_sum / batch;
    Ok(LossTerms { query, regularizer, consistency, total: query + regularizer + consistency })
}

/// Adam moments per parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: [Vec<f64>; 4],
    pub v: [Vec<f64>; 4],
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(store: &EmbeddingStore) -> Self {
        Self {
            m: store.blocks().map(|b| vec![0.0; b.len()]),
            v: store.blocks().map(|b| vec![0.0; b.len()]),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of every parameter block.
pub fn adam_step(store: &mut EmbeddingStore, grads: &Gradients, state: &mut AdamState, lr: f64) -> Result<()> {
    for (k, block) in store.blocks().iter().enumerate() {
        if block.len() != grads.blocks[k].len() || block.len() != state.m[k].len() {
            return Err(TrainError::Config(format!("shape mismatch in block {}", BLOCK_NAMES[k])).into());
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (k, params) in store.blocks_mut().into_iter().enumerate() {
        let (m, v, g) = (&mut state.m[k], &mut state.v[k], &grads.blocks[k]);
        for j in 0..params.len() {
            if g[j] == 0.0 && m[j] == 0.0 {
                continue;
            }
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            params[j] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// One line of the metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub step: usize,
    pub split: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mrr: Option<BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_mrr: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub store: EmbeddingStore,
    /// Snapshot with the best validation MRR, when validation ran.
    pub best: Option<(usize, f64, EmbeddingStore)>,
    pub metrics: Vec<MetricsRecord>,
    pub steps_run: usize,
    /// Mean batch loss over the first and last logging windows.
    pub initial_loss: Option<f64>,
    pub final_loss: Option<f64>,
}

struct Prepared {
    dnf: Vec<Conjunctive>,
    positives: Vec<EntityId>,
    exclusion: BTreeSet<EntityId>,
}

/// Training queries paired with their answer sets; queries without answers are skipped.
pub struct TrainingSet {
    items: Vec<Prepared>,
}

impl TrainingSet {
    pub fn new(queries: impl IntoIterator<Item = (QueryDag, BTreeSet<EntityId>)>) -> Result<Self> {
        let mut items = Vec::new();
        for (q, answers) in queries {
            if answers.is_empty() {
                continue;
            }
            let dnf = q.rewrite_negation()?.to_dnf()?;
            items.push(Prepared { dnf, positives: answers.iter().copied().collect(), exclusion: answers });
        }
        Ok(Self { items })
    }

    pub fn from_dataset(ds: &Dataset) -> Result<Self> {
        Self::new(ds.train.iter().map(|q| (q.rewritten.clone(), q.answers.train.clone())))
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Validation hook: returns per-type and mean MRR of the current store.
pub type Validator<'a> = dyn FnMut(&EmbeddingStore) -> Result<(BTreeMap<String, f64>, f64)> + 'a;

/// Runs the optimizer on an initialized store.
pub fn train_store(
    mut store: EmbeddingStore,
    set: &TrainingSet,
    cfg: &TrainingConfig,
    mut validate: Option<&mut Validator>,
    metrics_out: Option<&Path>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if set.is_empty() && cfg.steps > 0 {
        return Err(TrainError::EmptyBatch.into());
    }
    let mut log_file = match metrics_out {
        Some(p) => Some(fs::File::create(p)?),
        None => None,
    };
    let mut emit = |rec: MetricsRecord, metrics: &mut Vec<MetricsRecord>| -> Result<()> {
        if let Some(f) = log_file.as_mut() {
            writeln!(f, "{}", serde_json::to_string(&rec).expect("metrics serialize"))?;
        }
        metrics.push(rec);
        Ok(())
    };

    let loss_cfg = cfg.loss_config();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x9e37_79b9));
    let mut adam = AdamState::new(&store);
    let mut grads = Gradients::zeros(&store);
    let mut order: Vec<usize> = (0..set.len()).collect();
    let mut cursor = order.len();
    let mut metrics = Vec::new();
    let mut best: Option<(usize, f64, EmbeddingStore)> = None;
    let (mut window_sum, mut window_n) = (0.0, 0usize);
    let (mut initial_loss, mut final_loss) = (None, None);
    let log_interval = cfg.log_interval.max(1);
    let mut steps_run = 0;

    for step in 1..=cfg.steps {
        let mut picks = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.batch_size {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            picks.push(order[cursor]);
            cursor += 1;
        }
        let mut items = Vec::with_capacity(picks.len());
        for &p in &picks {
            let q = &set.items[p];
            let positive = q.positives[rng.gen_range(0..q.positives.len())];
            let negatives = sample_negatives(&mut rng, cfg.negatives_k, &q.exclusion, store.num_entities())?;
            items.push(BatchItem { dnf: &q.dnf, positive, negatives });
        }
        grads.clear();
        let terms = accumulate_gradients(&store, &items, &loss_cfg, &mut grads)?;
        check_finite(&terms, &grads, &store, step, &picks)?;
        adam_step(&mut store, &grads, &mut adam, cfg.learning_rate)?;
        steps_run = step;

        window_sum += terms.total;
        window_n += 1;
        if step % log_interval == 0 || step == cfg.steps {
            let mean = window_sum / window_n as f64;
            initial_loss.get_or_insert(mean);
            final_loss = Some(mean);
            info!("step {step}: loss {mean:.6}");
            emit(MetricsRecord { step, split: "train".into(), loss: Some(mean), mrr: None, mean_mrr: None }, &mut metrics)?;
            window_sum = 0.0;
            window_n = 0;
        }

        if let Some(v) = validate.as_mut() {
            if cfg.eval_interval > 0 && (step % cfg.eval_interval == 0 || step == cfg.steps) {
                let (per_type, mean) = v(&store)?;
                info!("step {step}: validation MRR {:.1}", mean * 100.0);
                emit(
                    MetricsRecord { step, split: "valid".into(), loss: None, mrr: Some(per_type), mean_mrr: Some(mean) },
                    &mut metrics,
                )?;
                if best.as_ref().map_or(true, |b| mean > b.1) {
                    best = Some((step, mean, store.clone()));
                }
                let best_step = best.as_ref().map_or(0, |b| b.0);
                if cfg.patience > 0 && step - best_step >= cfg.patience {
                    info!("early stop at step {step}: no improvement since step {best_step}");
                    break;
                }
            }
        }
    }
    Ok(TrainOutcome { store, best, metrics, steps_run, initial_loss, final_loss })
}

fn check_finite(terms: &LossTerms, grads: &Gradients, store: &EmbeddingStore, step: usize, picks: &[usize]) -> Result<()> {
    let bad_grad = grads.blocks.iter().position(|b| b.iter().any(|g| !g.is_finite()));
    if terms.total.is_finite() && bad_grad.is_none() {
        return Ok(());
    }
    let block = bad_grad
        .or_else(|| store.blocks().iter().position(|b| b.iter().any(|x| !x.is_finite())))
        .map_or("loss", |k| BLOCK_NAMES[k]);
    let what = if terms.total.is_finite() { "gradient" } else { "loss" };
    warn!("non-finite {what} at step {step}; batch query indices {picks:?}");
    Err(TrainError::NonFinite { what, step, batch: picks.first().copied().unwrap_or(0), block }.into())
}

/// Initializes a store from the dataset vocabulary and trains it, validating
/// on the dataset's validation queries when `eval_interval` is set.
pub fn train(ds: &Dataset, cfg: &TrainingConfig, out_dir: Option<&Path>) -> Result<TrainOutcome> {
    cfg.validate()?;
    let store = EmbeddingStore::init(ds.kg.num_entities(), &ds.kg.relations, &cfg.store_config(), cfg.seed)?;
    let set = TrainingSet::from_dataset(ds)?;
    info!("training on {} queries for {} steps", set.len(), cfg.steps);
    let mut validator = |s: &EmbeddingStore| -> Result<(BTreeMap<String, f64>, f64)> {
        let report = evaluator::evaluate(s, &ds.valid, Split::Valid)?;
        let per_type = report.per_type.iter().map(|(t, m)| (t.to_string(), m.mrr)).collect();
        Ok((per_type, report.mean_mrr()))
    };
    let validate: Option<&mut Validator> =
        if ds.valid.is_empty() || cfg.eval_interval == 0 { None } else { Some(&mut validator) };
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
    }
    let metrics_path = out_dir.map(|d| d.join("metrics.jsonl"));
    let outcome = train_store(store, &set, cfg, validate, metrics_path.as_deref())?;
    if let Some(dir) = out_dir {
        outcome.store.save_checkpoint(&dir.join("final.ckpt"))?;
        let best = outcome.best.as_ref().map_or(&outcome.store, |b| &b.2);
        best.save_checkpoint(&dir.join("best.ckpt"))?;
    }
    Ok(outcome)
}

/// Central finite-difference gradient of `batch_loss` for every parameter.
pub fn finite_difference_gradients(store: &EmbeddingStore, items: &[BatchItem], cfg: &LossConfig, h: f64) -> Result<Gradients> {
    let mut work = store.clone();
    let mut out = Gradients::zeros(store);
    for k in 0..4 {
        for j in 0..out.blocks[k].len() {
            let x = work.blocks()[k][j];
            work.blocks_mut()[k][j] = x + h;
            let up = batch_loss(&work, items, cfg)?.total;
            work.blocks_mut()[k][j] = x - h;
            let down = batch_loss(&work, items, cfg)?.total;
            work.blocks_mut()[k][j] = x;
            out.blocks[k][j] = (up - down) / (2.0 * h);
        }
    }
    Ok(out)
}

/// Largest analytic vs numeric mismatch, as `(block, index, analytic, numeric)`,
/// among entries outside `rel` relative and `abs` absolute tolerance.
pub fn worst_gradient_mismatch(analytic: &Gradients, numeric: &Gradients, rel: f64, abs: f64) -> Option<(&'static str, usize, f64, f64)> {
    let mut worst: Option<(f64, (&'static str, usize, f64, f64))> = None;
    for k in 0..4 {
        for (j, (&a, &n)) in analytic.blocks[k].iter().zip(&numeric.blocks[k]).enumerate() {
            let err = (a - n).abs();
            let allowed = abs.max(rel * a.abs().max(n.abs()));
            if err > allowed && worst.as_ref().map_or(true, |w| err / allowed > w.0) {
                worst = Some((err / allowed, (BLOCK_NAMES[k], j, a, n)));
            }
        }
    }
    worst.map(|w| w.1)
}

/// One Adam step on the regularizer alone; returns its value before the step.
pub fn regularizer_only_step(store: &mut EmbeddingStore, state: &mut AdamState, lr: f64) -> Result<f64> {
    let mut grads = Gradients::zeros(store);
    let mode = store.projection_mode();
    let mut total = 0.0;
    for (r, i) in reg_terms(store) {
        for (k, target) in [1.0, 0.0, 1.0, 0.0].into_iter().enumerate() {
            let x = store.relation_component(r, k, i) - target;
            total += x.abs();
            let learned = if k % 2 == 0 { mode.learns_scale() } else { mode.learns_shift() };
            if learned && x != 0.0 {
                grads.relation(r, k)[i] += x.signum();
            }
        }
    }
    adam_step(store, &grads, state, lr)?;
    Ok(total)
}

/// Total regularizer value over all transitive relations.
pub fn regularizer_value(store: &EmbeddingStore) -> f64 {
    reg_terms(store)
        .into_iter()
        .map(|(r, i)| transitive_reg_loss(&store.relation(r).expect("known relation"), i).expect("transitive slot"))
        .sum()
}

/// Projected box of `head` under relation `r`.
pub fn project_entity(store: &EmbeddingStore, head: EntityId, r: RelationId) -> Option<BoxEmbedding> {
    geometry::project(&store.entity_box(head)?, &store.relation(r)?).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::QueryType;
    use crate::store::RelationMeta;
    use approx::assert_relative_eq;

    fn store(tied: bool, mode: ProjectionMode, dim: usize) -> EmbeddingStore {
        let relations = vec![
            RelationMeta { name: "t".into(), transitive: true, inverse_of: None },
            RelationMeta { name: "a".into(), transitive: false, inverse_of: None },
            RelationMeta { name: "b".into(), transitive: false, inverse_of: None },
        ];
        let cfg = StoreConfig { dim, projection_mode: mode, answer_embedding: !tied, ..StoreConfig::default() };
        EmbeddingStore::init(6, &relations, &cfg, 3).unwrap()
    }

    #[test]
    fn loss_examples() {
        let l = margin_loss(0.0, &[2.0], 1.0);
        assert_relative_eq!(l, -2.0 * sigmoid(1.0).ln(), epsilon = 1e-12);
        assert_relative_eq!(l, 0.6265, epsilon = 1e-4);
        assert_relative_eq!(margin_loss(1.0, &[1.0], 1.0), 2.0 * 2f64.ln(), epsilon = 1e-12);
        let floor = -log_sigmoid(1.0);
        assert!((margin_loss(0.0, &[1e6], 1.0) - floor).abs() < 1e-9);
        assert!(margin_loss(0.3, &[1.0], 1.0) < margin_loss(0.4, &[1.0], 1.0));
        assert!(margin_loss(0.3, &[1.0], 1.0) > margin_loss(0.3, &[1.1], 1.0));
        assert!(log_sigmoid(-800.0).is_finite() && log_sigmoid(800.0) == 0.0);
    }

    #[test]
    fn regularizer_examples() {
        let slot = TransitiveSlot { dim: 0, inverse: false };
        let r = RelationEmbedding::identity(2).with_transitive(slot);
        assert_eq!(transitive_reg_loss(&r, 0).unwrap(), 0.0);
        let mut half = r.clone();
        half.r1[0] = 0.5;
        assert_eq!(transitive_reg_loss(&half, 0).unwrap(), 0.5);
        let mut other = r.clone();
        other.r1[0] = 0.0;
        other.r2[0] = 0.2;
        assert_relative_eq!(transitive_reg_loss(&other, 0).unwrap(), 1.2, epsilon = 1e-12);
        assert!(transitive_reg_loss(&RelationEmbedding::identity(2), 0).is_err());
        assert!(transitive_reg_loss(&r, 1).is_err());
    }

    #[test]
    fn consistency_examples() {
        let s = store(true, ProjectionMode::Full, 3);
        assert_eq!(answer_consistency_loss(EntityId(1), &s, 0.1), 0.0);
        let mut s = store(false, ProjectionMode::Full, 3);
        let c = s.entity_center(EntityId(1)).to_vec();
        s.answer_mut(EntityId(1)).copy_from_slice(&c);
        assert_eq!(answer_consistency_loss(EntityId(1), &s, 0.1), 0.0);
        let b = s.entity_box(EntityId(1)).unwrap();
        let mut a = c.clone();
        a[0] = b.upper()[0] + 0.5;
        s.answer_mut(EntityId(1)).copy_from_slice(&a);
        assert_relative_eq!(answer_consistency_loss(EntityId(1), &s, 0.0), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn negative_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let excl: BTreeSet<EntityId> = (0..4).map(EntityId).collect();
        assert_eq!(sample_negatives(&mut rng, 3, &excl, 5).unwrap(), vec![EntityId(4); 3]);
        let all: BTreeSet<EntityId> = (0..5).map(EntityId).collect();
        assert!(matches!(sample_negatives(&mut rng, 3, &all, 5), Err(TrainError::Unsampleable)));
        let draw = |seed| sample_negatives(&mut ChaCha8Rng::seed_from_u64(seed), 20, &BTreeSet::new(), 50).unwrap();
        assert_eq!(draw(9), draw(9));
    }

    #[test]
    fn adam_first_step_and_zero_gradient() {
        let mut s = store(true, ProjectionMode::Full, 2);
        let before = s.clone();
        let mut state = AdamState::new(&s);
        let grads = Gradients::zeros(&s);
        adam_step(&mut s, &grads, &mut state, 1e-3).unwrap();
        assert_eq!(s, before);
        let mut g = Gradients::zeros(&s);
        g.blocks[0][0] = 1.0;
        let mut state = AdamState::new(&s);
        adam_step(&mut s, &g, &mut state, 1e-3).unwrap();
        assert_relative_eq!(before.blocks()[0][0] - s.blocks()[0][0], 1e-3, epsilon = 1e-9);
    }

    fn items_for<'a>(dnfs: &'a [Vec<Conjunctive>]) -> Vec<BatchItem<'a>> {
        dnfs.iter()
            .enumerate()
            .map(|(k, d)| BatchItem {
                dnf: d,
                positive: EntityId((k % 6) as u32),
                negatives: vec![EntityId(((k + 2) % 6) as u32), EntityId(((k + 4) % 6) as u32)],
            })
            .collect()
    }

    fn all_type_dnfs() -> Vec<Vec<Conjunctive>> {
        let e = |i| EntityId(i);
        let r = |i| RelationId(i);
        QueryType::ALL
            .iter()
            .map(|&ty| {
                let (anchors, rels): (Vec<EntityId>, Vec<Vec<RelationId>>) = match ty {
                    QueryType::P1 => (vec![e(0)], vec![vec![r(0)]]),
                    QueryType::P2 => (vec![e(1)], vec![vec![r(1), r(0)]]),
                    QueryType::P3 => (vec![e(2)], vec![vec![r(1), r(2), r(0)]]),
                    QueryType::I2 | QueryType::U2 | QueryType::In2 => (vec![e(0), e(3)], vec![vec![r(1)], vec![r(0)]]),
                    QueryType::I3 | QueryType::In3 => (vec![e(0), e(3), e(5)], vec![vec![r(1)], vec![r(0)], vec![r(2)]]),
                    QueryType::Pi | QueryType::Pin | QueryType::Pni => (vec![e(4), e(3)], vec![vec![r(1), r(0)], vec![r(2)]]),
                    QueryType::Ip | QueryType::Up | QueryType::Inp => {
                        (vec![e(1), e(2)], vec![vec![r(1)], vec![r(2)], vec![r(0)]])
                    }
                };
                QueryDag::build(ty, &anchors, &rels).unwrap().rewrite_negation().unwrap().to_dnf().unwrap()
            })
            .collect()
    }

    #[test]
    fn forward_matches_public_scoring() {
        for tied in [true, false] {
            let s = store(tied, ProjectionMode::Full, 4);
            let dnfs = all_type_dnfs();
            let items = items_for(&dnfs);
            let cfg = LossConfig { gamma: 1.0, consistency_weight: 1.0 };
            let reference = batch_loss(&s, &items, &cfg).unwrap();
            let (terms, _) = batch_gradients(&s, &items, &cfg).unwrap();
            assert_relative_eq!(terms.total, reference.total, epsilon = 1e-12);
            assert_relative_eq!(terms.consistency, reference.consistency, epsilon = 1e-12);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for (tied, mode) in [(true, ProjectionMode::Full), (false, ProjectionMode::Additive), (false, ProjectionMode::Multiplicative)] {
            let s = store(tied, mode, 3);
            let dnfs = all_type_dnfs();
            let items = items_for(&dnfs);
            let cfg = LossConfig { gamma: 0.5, consistency_weight: 1.0 };
            let (_, g) = batch_gradients(&s, &items, &cfg).unwrap();
            let fd = finite_difference_gradients(&s, &items, &cfg, 1e-5).unwrap();
            assert_eq!(worst_gradient_mismatch(&g, &fd, 1e-4, 1e-7), None, "tied={tied} mode={mode:?}");
        }
    }

    #[test]
    fn additive_mode_has_no_scale_gradients() {
        let s = store(true, ProjectionMode::Additive, 3);
        let dnfs = all_type_dnfs();
        let items = items_for(&dnfs);
        let (_, mut g) = batch_gradients(&s, &items, &LossConfig { gamma: 1.0, consistency_weight: 1.0 }).unwrap();
        for r in 0..3 {
            assert!(g.relation(RelationId(r), 0).iter().all(|&x| x == 0.0));
            assert!(g.relation(RelationId(r), 2).iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn saturated_loss_has_flat_gradient() {
        let mut s = store(true, ProjectionMode::Full, 3);
        s.set_scoring(ScoringConfig { transitive: false, ..s.scoring() });
        let dnfs = vec![vec![Conjunctive::Projection(RelationId(1), Box::new(Conjunctive::Anchor(EntityId(0))))]];
        // positive at the query center, negatives far outside, huge margin
        let q = project_entity(&s, EntityId(0), RelationId(1)).unwrap();
        s.entity_center_mut(EntityId(1)).copy_from_slice(q.center());
        s.entity_center_mut(EntityId(2)).copy_from_slice(&[1e5, 1e5, 1e5]);
        let items = vec![BatchItem { dnf: &dnfs[0], positive: EntityId(1), negatives: vec![EntityId(2)] }];
        let (_, g) = batch_gradients(&s, &items, &LossConfig { gamma: 1000.0, consistency_weight: 1.0 }).unwrap();
        assert!(g.norm() < 1e-6, "{}", g.norm());
    }

    #[test]
    fn steps_zero_returns_initial_store() {
        let s = store(true, ProjectionMode::Full, 3);
        let set = TrainingSet::new(vec![(
            QueryDag::build(QueryType::P1, &[EntityId(0)], &[vec![RelationId(1)]]).unwrap(),
            BTreeSet::from([EntityId(1)]),
        )])
        .unwrap();
        let cfg = TrainingConfig { steps: 0, dim: 3, ..TrainingConfig::default() };
        let out = train_store(s.clone(), &set, &cfg, None, None).unwrap();
        assert_eq!(out.store, s);
        assert_eq!(out.steps_run, 0);
    }

    #[test]
    fn regularizer_alone_reaches_identity() {
        let mut s = store(true, ProjectionMode::Full, 3);
        let mut state = AdamState::new(&s);
        for _ in 0..500 {
            regularizer_only_step(&mut s, &mut state, 1e-3).unwrap();
        }
        assert!(regularizer_value(&s) < 1e-3, "{}", regularizer_value(&s));
    }

    #[test]
    fn config_validation_and_toml() {
        assert!(TrainingConfig { gamma: 0.0, ..TrainingConfig::default() }.validate().is_err());
        assert!(TrainingConfig { negatives_k: 0, ..TrainingConfig::default() }.validate().is_err());
        let cfg: TrainingConfig = toml::from_str("dim = 8\nprojection_mode = \"additive\"\n").unwrap();
        assert_eq!(cfg.dim, 8);
        assert_eq!(cfg.projection_mode, ProjectionMode::Additive);
        assert!(toml::from_str::<TrainingConfig>("bogus = 1").is_err());
    }
}
