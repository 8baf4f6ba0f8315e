//! Fixtures shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use geometre::dataset::{brute_force_answers, generate_synthetic, Closure, Dataset, Graph, SyntheticConfig, Triple};
use geometre::evaluator::{evaluate, EvalReport};
use geometre::geometry::{
    classify_idempotency, complement_intersection_violations, dist_box_tr, intersect, project, BoxEmbedding,
    Idempotency, RelationEmbedding, DEFAULT_IDEMPOTENCY_TOL,
};
use geometre::ids::{EntityId, RelationId};
use geometre::query::{Conjunctive, QueryDag, QueryType};
use geometre::store::{EmbeddingStore, ProjectionMode, RelationMeta, StoreConfig};
use geometre::trainer::{
    batch_gradients, finite_difference_gradients, train, worst_gradient_mismatch, BatchItem, LossConfig,
    TrainOutcome, TrainingConfig,
};
use geometre::transitivity::{extract_chains, spearman_chain_score};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn e(i: u32) -> EntityId {
    EntityId(i)
}

pub fn r(i: u32) -> RelationId {
    RelationId(i)
}

pub fn ids(v: &[u32]) -> BTreeSet<EntityId> {
    v.iter().map(|&x| EntityId(x)).collect()
}

pub fn plain_relations(n: usize) -> Vec<RelationMeta> {
    (0..n).map(|i| RelationMeta { name: format!("r{i}"), transitive: false, inverse_of: None }).collect()
}

// ---------------------------------------------------------------------------
// geometry

fn random_box(rng: &mut ChaCha8Rng, dim: usize) -> BoxEmbedding {
    let c = (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let o = (0..dim).map(|_| rng.gen_range(0.0..2.0)).collect();
    BoxEmbedding::new(c, o).unwrap()
}

fn random_vec(rng: &mut ChaCha8Rng, dim: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(lo..hi)).collect()
}

fn max_abs_diff(a: &BoxEmbedding, b: &BoxEmbedding) -> f64 {
    a.center()
        .iter()
        .zip(b.center())
        .chain(a.offset().iter().zip(b.offset()))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy)]
pub struct IdempotencyReport {
    /// Identity or constant relations whose double projection matched to 1e-9.
    pub idempotent: usize,
    pub idempotent_total: usize,
    /// General relations classified non-idempotent with a concrete witness box.
    pub witnessed: usize,
    pub general_total: usize,
}

/// Double projection under identity and constant relations, and witness
/// search under random general relations.
pub fn idempotency_report(cases: usize, seed: u64) -> IdempotencyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idempotent = 0;
    for k in 0..cases {
        let dim = rng.gen_range(1..=8);
        let rel = if k % 2 == 0 {
            RelationEmbedding::identity(dim)
        } else {
            let r2 = random_vec(&mut rng, dim, -3.0, 3.0);
            let r4 = random_vec(&mut rng, dim, 0.0, 2.0);
            RelationEmbedding::new(vec![0.0; dim], r2, vec![0.0; dim], r4).unwrap()
        };
        let b = random_box(&mut rng, dim);
        let once = project(&b, &rel).unwrap();
        let twice = project(&once, &rel).unwrap();
        let class_ok = classify_idempotency(&rel, DEFAULT_IDEMPOTENCY_TOL) != Idempotency::NotIdempotent;
        if class_ok && max_abs_diff(&once, &twice) <= 1e-9 {
            idempotent += 1;
        }
    }
    let mut witnessed = 0;
    for _ in 0..cases {
        let dim = rng.gen_range(1..=8);
        let rel = RelationEmbedding::new(
            random_vec(&mut rng, dim, -2.0, 2.0),
            random_vec(&mut rng, dim, -2.0, 2.0),
            random_vec(&mut rng, dim, -2.0, 2.0),
            random_vec(&mut rng, dim, -2.0, 2.0),
        )
        .unwrap();
        if classify_idempotency(&rel, DEFAULT_IDEMPOTENCY_TOL) != Idempotency::NotIdempotent {
            continue;
        }
        let found = (0..100).any(|_| {
            let b = random_box(&mut rng, dim);
            let once = project(&b, &rel).unwrap();
            max_abs_diff(&once, &project(&once, &rel).unwrap()) > 1e-9
        });
        witnessed += found as usize;
    }
    IdempotencyReport { idempotent, idempotent_total: cases, witnessed, general_total: cases }
}

/// Random pairs of disjoint boxes; returns `(pairs, total violations)` after
/// sampling `points_per_pair` points of the second box of each pair.
pub fn complement_violations(pairs: usize, points_per_pair: u64, seed: u64) -> (usize, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut done = 0;
    let mut violations = 0;
    while done < pairs {
        let dim = rng.gen_range(1..=6);
        let b1 = random_box(&mut rng, dim);
        let b2 = random_box(&mut rng, dim);
        if !intersect(&[b1.clone(), b2.clone()]).unwrap().is_empty() {
            continue;
        }
        violations += complement_intersection_violations(&b1, &b2, points_per_pair, rng.gen()).unwrap();
        done += 1;
    }
    (done, violations)
}

// ---------------------------------------------------------------------------
// oracle fixtures

/// Five entities, three relations:
///
/// ```text
/// r0: 0->1 0->2 1->3 2->3 3->4
/// r1: 4->2 1->2 0->3
/// r2: 2->4 3->1
/// ```
pub fn hand_graph() -> Graph {
    let t = |h, rel, tl| Triple::new(h, rel, tl);
    let triples = [
        t(0, 0, 1),
        t(0, 0, 2),
        t(1, 0, 3),
        t(2, 0, 3),
        t(3, 0, 4),
        t(4, 1, 2),
        t(1, 1, 2),
        t(0, 1, 3),
        t(2, 2, 4),
        t(3, 2, 1),
    ];
    Graph::from_triples(5, &plain_relations(3), &triples)
}

/// One query of every type on `hand_graph` with its hand-enumerated answers.
pub fn hand_fixtures() -> Vec<(QueryDag, BTreeSet<EntityId>)> {
    use QueryType::*;
    let cases: Vec<(QueryType, Vec<u32>, Vec<Vec<u32>>, Vec<u32>)> = vec![
        // {1,2}
        (P1, vec![0], vec![vec![0]], vec![1, 2]),
        // {1,2} -> {3}
        (P2, vec![0], vec![vec![0, 0]], vec![3]),
        // {3} -> {4}
        (P3, vec![0], vec![vec![0, 0, 0]], vec![4]),
        // {1,2} & {2}
        (I2, vec![0, 4], vec![vec![0], vec![1]], vec![2]),
        // {1,2} & {2} & {2}
        (I3, vec![0, 4, 1], vec![vec![0], vec![1], vec![1]], vec![2]),
        // {3} & {3}
        (Pi, vec![0, 0], vec![vec![0, 0], vec![1]], vec![3]),
        // ({1,2} & {2}) -> r2 -> {4}
        (Ip, vec![0, 1], vec![vec![0], vec![1], vec![2]], vec![4]),
        // {3} | {2}
        (U2, vec![0, 4], vec![vec![1], vec![1]], vec![2, 3]),
        // ({3} | {2}) -> r2 -> {1,4}
        (Up, vec![0, 4], vec![vec![1], vec![1], vec![2]], vec![1, 4]),
        // {1,2} minus {2}
        (In2, vec![0, 4], vec![vec![0], vec![1]], vec![1]),
        // {1,2} & {1} minus {2}
        (In3, vec![0, 3, 4], vec![vec![0], vec![2], vec![1]], vec![1]),
        // ({1,2} minus {2}) -> r0 -> {3}
        (Inp, vec![0, 4], vec![vec![0], vec![1], vec![0]], vec![3]),
        // {3} minus {2}
        (Pin, vec![0, 4], vec![vec![0, 0], vec![1]], vec![3]),
        // {1,2} minus {3}
        (Pni, vec![0, 0], vec![vec![0, 0], vec![0]], vec![1, 2]),
    ];
    cases
        .into_iter()
        .map(|(ty, anchors, rels, answers)| {
            let anchors: Vec<EntityId> = anchors.into_iter().map(EntityId).collect();
            let rels: Vec<Vec<RelationId>> =
                rels.into_iter().map(|b| b.into_iter().map(RelationId).collect()).collect();
            (QueryDag::build(ty, &anchors, &rels).unwrap(), ids(&answers))
        })
        .collect()
}

/// Hand fixtures whose oracle answers differ from the hand enumeration.
pub fn hand_fixture_mismatches() -> Vec<QueryType> {
    let g = hand_graph();
    hand_fixtures()
        .into_iter()
        .filter(|(q, want)| &brute_force_answers(&g, q, Closure::Raw) != want)
        .map(|(q, _)| q.query_type())
        .collect()
}

pub fn random_graph(n: usize, relations: usize, p: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut triples = Vec::new();
    for h in 0..n as u32 {
        for rel in 0..relations as u32 {
            for t in 0..n as u32 {
                if rng.gen_bool(p) {
                    triples.push(Triple::new(h, rel, t));
                }
            }
        }
    }
    Graph::from_triples(n, &plain_relations(relations), &triples)
}

fn shapes(ty: QueryType, n: u32, nr: u32) -> Vec<(Vec<EntityId>, Vec<Vec<RelationId>>)> {
    let mut out = Vec::new();
    for a in 0..n {
        for b in 0..n {
            for x in 0..nr {
                for y in 0..nr {
                    match ty {
                        QueryType::In2 => out.push((vec![e(a), e(b)], vec![vec![r(x)], vec![r(y)]])),
                        QueryType::Pin => {
                            for z in 0..nr {
                                out.push((vec![e(a), e(b)], vec![vec![r(x), r(z)], vec![r(y)]]));
                            }
                        }
                        QueryType::In3 => {
                            for c in 0..n {
                                for z in 0..nr {
                                    out.push((vec![e(a), e(b), e(c)], vec![vec![r(x)], vec![r(y)], vec![r(z)]]));
                                }
                            }
                        }
                        other => panic!("no exhaustive shape for {other}"),
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct SupersetReport {
    pub graphs: usize,
    pub queries: usize,
    pub violations: usize,
    /// Queries whose approximation strictly enlarged the answer set.
    pub strict: usize,
}

/// Checks `approx ⊇ exact` for every 2in, 3in and pin instance on random
/// 10-entity graphs.
pub fn negation_superset_report(graphs: usize, seed: u64) -> SupersetReport {
    let mut rep = SupersetReport { graphs, queries: 0, violations: 0, strict: 0 };
    for k in 0..graphs {
        let g = random_graph(10, 2, 0.25, seed + k as u64);
        for ty in [QueryType::In2, QueryType::In3, QueryType::Pin] {
            for (anchors, rels) in shapes(ty, 10, 2) {
                let q = QueryDag::build(ty, &anchors, &rels).unwrap();
                let exact = brute_force_answers(&g, &q, Closure::Raw);
                let approx = brute_force_answers(&g, &q.rewrite_negation().unwrap(), Closure::Raw);
                rep.queries += 1;
                if !approx.is_superset(&exact) {
                    rep.violations += 1;
                } else if approx.len() > exact.len() {
                    rep.strict += 1;
                }
            }
        }
    }
    rep
}

// ---------------------------------------------------------------------------
// gradients

/// Relations of the gradient store: a transitive inverse pair and two plain ones.
pub fn gradient_relations() -> Vec<RelationMeta> {
    vec![
        RelationMeta { name: "up".into(), transitive: true, inverse_of: Some(RelationId(1)) },
        RelationMeta { name: "down".into(), transitive: true, inverse_of: Some(RelationId(0)) },
        RelationMeta { name: "a".into(), transitive: false, inverse_of: None },
        RelationMeta { name: "b".into(), transitive: false, inverse_of: None },
    ]
}

pub const GRADIENT_ENTITIES: u32 = 7;
pub const MODES: [ProjectionMode; 3] = [ProjectionMode::Full, ProjectionMode::Additive, ProjectionMode::Multiplicative];

fn random_query(rng: &mut ChaCha8Rng, ty: QueryType) -> QueryDag {
    let (n_anchors, lens) = ty.layout();
    let anchors: Vec<EntityId> = (0..n_anchors).map(|_| e(rng.gen_range(0..GRADIENT_ENTITIES))).collect();
    let rels: Vec<Vec<RelationId>> = lens.iter().map(|&l| (0..l).map(|_| r(rng.gen_range(0..4))).collect()).collect();
    QueryDag::build(ty, &anchors, &rels).unwrap()
}

/// Case `k` of the gradient suite: a randomly perturbed store and the DNFs
/// of 1 to 3 queries, the first of type `QueryType::ALL[k % 14]`.
pub struct GradientCase {
    pub store: EmbeddingStore,
    pub dnfs: Vec<Vec<Conjunctive>>,
    pub cfg: LossConfig,
    pub positives: Vec<(EntityId, Vec<EntityId>)>,
}

impl GradientCase {
    pub fn new(k: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mode = MODES[k % 3];
        let tied = (k / 3) % 2 == 0;
        let dim = rng.gen_range(2..=8);
        let cfg = StoreConfig { dim, projection_mode: mode, answer_embedding: !tied, ..StoreConfig::default() };
        let mut store = EmbeddingStore::init(GRADIENT_ENTITIES as usize, &gradient_relations(), &cfg, rng.gen()).unwrap();
        for block in store.blocks_mut() {
            for x in block.iter_mut() {
                *x += rng.gen_range(-1.0..1.0);
            }
        }
        let mut scoring = store.scoring();
        scoring.alpha = rng.gen_range(0.0..0.5);
        store.set_scoring(scoring);
        let mut dnfs = Vec::new();
        let mut positives = Vec::new();
        for j in 0..rng.gen_range(1..=3) {
            let ty = if j == 0 { QueryType::ALL[k % 14] } else { QueryType::ALL[rng.gen_range(0..14)] };
            let q = random_query(&mut rng, ty).rewrite_negation().unwrap();
            dnfs.push(q.to_dnf().unwrap());
            let pos = e(rng.gen_range(0..GRADIENT_ENTITIES));
            let negs = (0..rng.gen_range(1..=3)).map(|_| e(rng.gen_range(0..GRADIENT_ENTITIES))).collect();
            positives.push((pos, negs));
        }
        let cfg = LossConfig { gamma: rng.gen_range(0.5..2.0), consistency_weight: rng.gen_range(0.0..1.5) };
        Self { store, dnfs, cfg, positives }
    }

    pub fn items(&self) -> Vec<BatchItem<'_>> {
        self.dnfs
            .iter()
            .zip(&self.positives)
            .map(|(d, (p, n))| BatchItem { dnf: d, positive: *p, negatives: n.clone() })
            .collect()
    }

    /// Worst analytic vs central-difference mismatch at `h = 1e-5`.
    pub fn mismatch(&self) -> Option<(&'static str, usize, f64, f64)> {
        let items = self.items();
        let (_, analytic) = batch_gradients(&self.store, &items, &self.cfg).unwrap();
        let numeric = finite_difference_gradients(&self.store, &items, &self.cfg, 1e-5).unwrap();
        worst_gradient_mismatch(&analytic, &numeric, 1e-4, 1e-7)
    }
}

// ---------------------------------------------------------------------------
// training fixtures

/// Three-node transitive chains on relation 0 with every closure edge held out to test.
pub fn transitive_fixture() -> Dataset {
    let cfg = SyntheticConfig {
        n_entities: 150,
        n_relations: 3,
        n_transitive: 1,
        chain_length: 3,
        chains_per_relation: 50,
        closure_train_fraction: 0.0,
        seed: 1,
        train_queries_per_type: 100,
        eval_queries_per_type: 20,
        ..SyntheticConfig::default()
    };
    generate_synthetic(&cfg).unwrap()
}

pub fn transitive_training_config(steps: usize, transitive_loss: bool) -> TrainingConfig {
    TrainingConfig {
        alpha: 0.0,
        dim: 32,
        steps,
        learning_rate: 0.01,
        transitive_loss_enabled: transitive_loss,
        seed: 1,
        log_interval: 0,
        ..TrainingConfig::default()
    }
}

#[derive(Debug, Clone)]
pub struct InferenceReport {
    pub withheld: usize,
    /// Withheld closure pairs with `dist_box_tr < 0.05`.
    pub inferred: usize,
    pub median_distance: f64,
    pub chains: usize,
    /// Chains whose answer coordinates are ordered with margin `>= lambda / 2`.
    pub ordered: usize,
    pub elapsed: Duration,
}

/// Trains on `transitive_fixture` and measures closure inference and chain ordering.
pub fn transitive_inference(steps: usize) -> InferenceReport {
    let ds = transitive_fixture();
    let cfg = transitive_training_config(steps, true);
    let t0 = Instant::now();
    let out = train(&ds, &cfg, None).unwrap();
    let elapsed = t0.elapsed();
    let s = &out.store;
    let rel = r(0);
    let slot = s.transitive_slot(rel).unwrap();
    let projected = s.relation(rel).unwrap();
    let mut dists: Vec<f64> = ds
        .kg
        .test
        .iter()
        .filter(|t| t.relation == rel)
        .map(|t| {
            let q = project(&s.entity_box(t.head).unwrap(), &projected).unwrap();
            dist_box_tr(&q, s.answer(t.tail), slot.dim, cfg.alpha, cfg.lambda, slot.inverse).unwrap()
        })
        .collect();
    dists.sort_by(f64::total_cmp);
    let margin = cfg.lambda / 2.0;
    let chains = extract_chains(&ds.kg.train, rel);
    let ordered = chains
        .iter()
        .filter(|c| {
            let v: Vec<f64> = c.entities.iter().map(|&x| s.answer(x)[slot.dim]).collect();
            v.windows(2).all(|w| if slot.inverse { w[1] - w[0] >= margin } else { w[0] - w[1] >= margin })
        })
        .count();
    InferenceReport {
        withheld: dists.len(),
        inferred: dists.iter().filter(|&&d| d < 0.05).count(),
        median_distance: dists.get(dists.len() / 2).copied().unwrap_or(f64::NAN),
        chains: chains.len(),
        ordered,
        elapsed,
    }
}

/// Mean chain Spearman with and without the transitive loss, same seeds.
pub fn chain_spearman_pair(steps: usize) -> (f64, f64, Duration) {
    let ds = transitive_fixture();
    let chains = extract_chains(&ds.kg.train, r(0));
    let t0 = Instant::now();
    let mut scores = [0.0; 2];
    for (k, on) in [true, false].into_iter().enumerate() {
        let out = train(&ds, &transitive_training_config(steps, on), None).unwrap();
        scores[k] = spearman_chain_score(&chains, &out.store, r(0)).unwrap().unwrap_or(f64::NAN);
    }
    (scores[0], scores[1], t0.elapsed())
}

/// Default 200-entity synthetic dataset.
pub fn sanity_dataset() -> Dataset {
    generate_synthetic(&SyntheticConfig { seed: 7, ..SyntheticConfig::default() }).unwrap()
}

pub fn sanity_training_config() -> TrainingConfig {
    TrainingConfig { steps: 5000, learning_rate: 0.01, seed: 3, log_interval: 0, ..TrainingConfig::default() }
}

/// Trains on the sanity dataset and evaluates the test split twice.
pub fn sanity_run() -> (TrainOutcome, EvalReport, EvalReport) {
    let ds = sanity_dataset();
    let out = train(&ds, &sanity_training_config(), None).unwrap();
    let a = evaluate(&out.store, &ds.test, geometre::dataset::Split::Test).unwrap();
    let b = evaluate(&out.store, &ds.test, geometre::dataset::Split::Test).unwrap();
    (out, a, b)
}
