//! Portable dataset formats, synthetic graph generation and the exact
//! set-semantics answer oracle.
//!
//! Directory layout:
//! - `entities.tsv`: `id<TAB>name`
//! - `relations.tsv`: `id<TAB>name<TAB>transitive(0/1)<TAB>inverse_of(id or -1)`
//! - `triples_{train,valid,test}.tsv`: `head<TAB>relation<TAB>tail`, each file
//!   holding only the triples first added in that split
//! - `queries_{train,valid,test}.jsonl`: one [`QueryRecord`] per line

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::DatasetError;
use crate::ids::{EntityId, RelationId};
use crate::query::{parse_query, Node, NodeId, QueryDag, QueryRecord, QueryType};
use crate::store::RelationMeta;

type Result<T> = std::result::Result<T, DatasetError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: u32, relation: u32, tail: u32) -> Self {
        Self { head: EntityId(head), relation: RelationId(relation), tail: EntityId(tail) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }

    pub fn previous(self) -> Option<Split> {
        match self {
            Split::Train => None,
            Split::Valid => Some(Split::Train),
            Split::Test => Some(Split::Valid),
        }
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

/// Entity and relation vocabularies plus the triples first added in each split.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeGraph {
    pub entities: Vec<String>,
    pub relations: Vec<RelationMeta>,
    pub train: Vec<Triple>,
    pub valid: Vec<Triple>,
    pub test: Vec<Triple>,
}

impl KnowledgeGraph {
    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn split_triples(&self, split: Split) -> &[Triple] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    /// Cumulative graph: train, train + valid, or everything.
    pub fn graph_up_to(&self, split: Split) -> Graph {
        let mut g = Graph::new(self.num_entities(), &self.relations);
        for s in Split::ALL {
            g.extend(self.split_triples(s).iter().copied());
            if s == split {
                break;
            }
        }
        g
    }
}

/// Answer sets of one query under the three cumulative graphs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SplitAnswers {
    pub train: BTreeSet<EntityId>,
    pub valid: BTreeSet<EntityId>,
    pub test: BTreeSet<EntityId>,
}

impl SplitAnswers {
    pub fn get(&self, split: Split) -> &BTreeSet<EntityId> {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    /// Answers first appearing in `split`: the set evaluated for that split.
    pub fn hard(&self, split: Split) -> BTreeSet<EntityId> {
        match split.previous() {
            None => self.train.clone(),
            Some(prev) => self.get(split).difference(self.get(prev)).copied().collect(),
        }
    }

    pub fn inclusion_holds(&self) -> bool {
        self.train.is_subset(&self.valid) && self.valid.is_subset(&self.test)
    }
}

/// A loaded query: record layout, original DAG, its negation-free rewrite and answers.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetQuery {
    pub anchors: Vec<EntityId>,
    pub rels: Vec<Vec<RelationId>>,
    pub dag: QueryDag,
    pub rewritten: QueryDag,
    pub answers: SplitAnswers,
}

impl DatasetQuery {
    pub fn new(anchors: Vec<EntityId>, rels: Vec<Vec<RelationId>>, ty: QueryType, answers: SplitAnswers) -> Result<Self> {
        let dag = QueryDag::build(ty, &anchors, &rels).map_err(|e| gen_err(e.to_string()))?;
        let rewritten = dag.rewrite_negation().map_err(|e| gen_err(e.to_string()))?;
        Ok(Self { anchors, rels, dag, rewritten, answers })
    }

    /// Original type tag, kept for per-type reporting.
    pub fn query_type(&self) -> QueryType {
        self.dag.query_type()
    }

    pub fn to_record(&self) -> QueryRecord {
        let ids = |s: &BTreeSet<EntityId>| s.iter().map(|e| e.0).collect();
        QueryRecord {
            query_type: self.query_type().to_string(),
            anchors: self.anchors.iter().map(|e| e.0).collect(),
            rels: self.rels.iter().map(|b| b.iter().map(|r| r.0).collect()).collect(),
            answers_train: ids(&self.answers.train),
            answers_valid: ids(&self.answers.valid),
            answers_test: ids(&self.answers.test),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub kg: KnowledgeGraph,
    pub train: Vec<DatasetQuery>,
    pub valid: Vec<DatasetQuery>,
    pub test: Vec<DatasetQuery>,
}

impl Dataset {
    pub fn queries(&self, split: Split) -> &[DatasetQuery] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn type_counts(&self, split: Split) -> BTreeMap<QueryType, usize> {
        let mut counts = BTreeMap::new();
        for q in self.queries(split) {
            *counts.entry(q.query_type()).or_insert(0) += 1;
        }
        counts
    }

    /// Writes the portable directory layout.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut s = String::new();
        for (k, name) in self.kg.entities.iter().enumerate() {
            writeln!(s, "{k}\t{name}").expect("string write");
        }
        fs::write(dir.join("entities.tsv"), &s)?;

        s.clear();
        for (k, m) in self.kg.relations.iter().enumerate() {
            let inv = m.inverse_of.map_or(-1, |r| r.0 as i64);
            writeln!(s, "{k}\t{}\t{}\t{inv}", m.name, m.transitive as u8).expect("string write");
        }
        fs::write(dir.join("relations.tsv"), &s)?;

        for split in Split::ALL {
            s.clear();
            for t in self.kg.split_triples(split) {
                writeln!(s, "{}\t{}\t{}", t.head.0, t.relation.0, t.tail.0).expect("string write");
            }
            fs::write(dir.join(format!("triples_{}.tsv", split.as_str())), &s)?;

            s.clear();
            for q in self.queries(split) {
                let line = serde_json::to_string(&q.to_record()).expect("records serialize");
                s.push_str(&line);
                s.push('\n');
            }
            fs::write(dir.join(format!("queries_{}.jsonl", split.as_str())), &s)?;
        }
        Ok(())
    }
}

fn gen_err(msg: impl Into<String>) -> DatasetError {
    DatasetError::Generation(msg.into())
}

fn invalid(file: &Path, line: usize, message: impl Into<String>) -> DatasetError {
    DatasetError::Validation { file: file.to_path_buf(), line, message: message.into() }
}

fn read(dir: &Path, name: &str) -> Result<(PathBuf, String)> {
    let path = dir.join(name);
    if !path.is_file() {
        return Err(DatasetError::MissingFile(path));
    }
    let text = fs::read_to_string(&path)?;
    Ok((path, text))
}

fn parse_u32(file: &Path, line: usize, field: &str, what: &str) -> Result<u32> {
    field.trim().parse().map_err(|_| invalid(file, line, format!("bad {what} {field:?}")))
}

/// Loads and validates a dataset directory.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let (path, text) = read(dir, "entities.tsv")?;
    let mut entities = Vec::new();
    for (k, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let mut cols = line.split('\t');
        let id = parse_u32(&path, k + 1, cols.next().unwrap_or(""), "entity id")?;
        if id as usize != entities.len() {
            return Err(invalid(&path, k + 1, format!("entity ids must be dense, expected {}", entities.len())));
        }
        entities.push(cols.next().unwrap_or("").to_string());
    }

    let (path, text) = read(dir, "relations.tsv")?;
    let mut relations = Vec::new();
    for (k, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(invalid(&path, k + 1, format!("expected 4 columns, found {}", cols.len())));
        }
        let id = parse_u32(&path, k + 1, cols[0], "relation id")?;
        if id as usize != relations.len() {
            return Err(invalid(&path, k + 1, format!("relation ids must be dense, expected {}", relations.len())));
        }
        let transitive = match cols[2].trim() {
            "0" => false,
            "1" => true,
            other => return Err(invalid(&path, k + 1, format!("bad transitive flag {other:?}"))),
        };
        let inverse_of = match cols[3].trim().parse::<i64>() {
            Ok(-1) => None,
            Ok(x) if x >= 0 => Some(RelationId(x as u32)),
            _ => return Err(invalid(&path, k + 1, format!("bad inverse_of {:?}", cols[3]))),
        };
        relations.push(RelationMeta { name: cols[1].to_string(), transitive, inverse_of });
    }
    for (k, m) in relations.iter().enumerate() {
        if let Some(inv) = m.inverse_of {
            if inv.index() >= relations.len() {
                return Err(invalid(&dir.join("relations.tsv"), k + 1, format!("inverse_of {inv} out of range")));
            }
        }
    }

    let mut seen = HashSet::new();
    let mut split_triples: Vec<Vec<Triple>> = Vec::new();
    for split in Split::ALL {
        let (path, text) = read(dir, &format!("triples_{}.tsv", split.as_str()))?;
        let mut triples = Vec::new();
        for (k, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(invalid(&path, k + 1, format!("expected 3 columns, found {}", cols.len())));
            }
            let t = Triple::new(
                parse_u32(&path, k + 1, cols[0], "head")?,
                parse_u32(&path, k + 1, cols[1], "relation")?,
                parse_u32(&path, k + 1, cols[2], "tail")?,
            );
            if t.head.index() >= entities.len() || t.tail.index() >= entities.len() {
                return Err(invalid(&path, k + 1, "entity id out of range"));
            }
            if t.relation.index() >= relations.len() {
                return Err(invalid(&path, k + 1, "relation id out of range"));
            }
            if !seen.insert(t) {
                return Err(invalid(&path, k + 1, "duplicate triple"));
            }
            triples.push(t);
        }
        split_triples.push(triples);
    }
    let test = split_triples.pop().expect("three splits");
    let valid = split_triples.pop().expect("three splits");
    let train = split_triples.pop().expect("three splits");
    let kg = KnowledgeGraph { entities, relations, train, valid, test };

    let mut queries: Vec<Vec<DatasetQuery>> = Vec::new();
    for split in Split::ALL {
        let (path, text) = read(dir, &format!("queries_{}.jsonl", split.as_str()))?;
        let mut out = Vec::new();
        for (k, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let record: QueryRecord =
                serde_json::from_str(line).map_err(|e| invalid(&path, k + 1, format!("malformed record: {e}")))?;
            out.push(query_from_record(&record, &kg).map_err(|m| invalid(&path, k + 1, m))?);
        }
        queries.push(out);
    }
    let test = queries.pop().expect("three splits");
    let valid = queries.pop().expect("three splits");
    let train = queries.pop().expect("three splits");
    let ds = Dataset { kg, train, valid, test };
    for split in Split::ALL {
        let counts: Vec<String> =
            ds.type_counts(split).iter().map(|(t, n)| format!("{t}={n}")).collect();
        info!("{} queries: {}", split.as_str(), counts.join(" "));
    }
    info!(
        "triples: train={} valid={} test={}",
        ds.kg.train.len(),
        ds.kg.valid.len(),
        ds.kg.test.len()
    );
    Ok(ds)
}

fn query_from_record(record: &QueryRecord, kg: &KnowledgeGraph) -> std::result::Result<DatasetQuery, String> {
    let dag = parse_query(record, kg.num_entities(), kg.relations.len()).map_err(|e| e.to_string())?;
    let set = |v: &[u32], name: &str| -> std::result::Result<BTreeSet<EntityId>, String> {
        v.iter()
            .map(|&e| {
                if (e as usize) < kg.num_entities() {
                    Ok(EntityId(e))
                } else {
                    Err(format!("{name} entity {e} out of range"))
                }
            })
            .collect()
    };
    let answers = SplitAnswers {
        train: set(&record.answers_train, "answers_train")?,
        valid: set(&record.answers_valid, "answers_valid")?,
        test: set(&record.answers_test, "answers_test")?,
    };
    if !answers.train.is_subset(&answers.valid) {
        return Err("inclusion violated: answers_train is not a subset of answers_valid".into());
    }
    if !answers.valid.is_subset(&answers.test) {
        return Err("inclusion violated: answers_valid is not a subset of answers_test".into());
    }
    let rewritten = dag.rewrite_negation().map_err(|e| e.to_string())?;
    Ok(DatasetQuery {
        anchors: record.anchors.iter().map(|&e| EntityId(e)).collect(),
        rels: record.rels.iter().map(|b| b.iter().map(|&r| RelationId(r)).collect()).collect(),
        dag,
        rewritten,
        answers,
    })
}

/// Adjacency view for exact query evaluation.
#[derive(Debug, Clone)]
pub struct Graph {
    num_entities: usize,
    transitive: Vec<bool>,
    out: BTreeMap<(RelationId, EntityId), BTreeSet<EntityId>>,
}

/// Whether transitive relations are closed before evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Closure {
    Raw,
    TransitiveClosed,
}

impl Graph {
    pub fn new(num_entities: usize, relations: &[RelationMeta]) -> Self {
        Self { num_entities, transitive: relations.iter().map(|m| m.transitive).collect(), out: BTreeMap::new() }
    }

    pub fn from_triples(num_entities: usize, relations: &[RelationMeta], triples: &[Triple]) -> Self {
        let mut g = Self::new(num_entities, relations);
        g.extend(triples.iter().copied());
        g
    }

    pub fn extend(&mut self, triples: impl IntoIterator<Item = Triple>) {
        for t in triples {
            self.out.entry((t.relation, t.head)).or_default().insert(t.tail);
        }
    }

    pub fn num_entities(&self) -> usize {
        self.num_entities
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.out.get(&(t.relation, t.head)).map_or(false, |s| s.contains(&t.tail))
    }

    pub fn tails(&self, h: EntityId, r: RelationId) -> impl Iterator<Item = EntityId> + '_ {
        self.out.get(&(r, h)).into_iter().flatten().copied()
    }

    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        self.out
            .iter()
            .flat_map(|(&(r, h), ts)| ts.iter().map(move |&t| Triple { head: h, relation: r, tail: t }))
    }

    /// Copy with every transitive relation replaced by its transitive closure.
    pub fn transitively_closed(&self) -> Graph {
        let mut g = self.clone();
        for (k, _) in self.transitive.iter().enumerate().filter(|(_, &t)| t) {
            let r = RelationId(k as u32);
            let heads: Vec<EntityId> =
                self.out.keys().filter(|(rel, _)| *rel == r).map(|&(_, h)| h).collect();
            for h in heads {
                let mut reach = BTreeSet::new();
                let mut stack: Vec<EntityId> = self.tails(h, r).collect();
                while let Some(x) = stack.pop() {
                    if reach.insert(x) {
                        stack.extend(self.tails(x, r));
                    }
                }
                g.out.insert((r, h), reach);
            }
        }
        g
    }

    fn image(&self, from: &BTreeSet<EntityId>, r: RelationId) -> BTreeSet<EntityId> {
        from.iter().flat_map(|&h| self.tails(h, r)).collect()
    }
}

/// Exact answers of `q` under set semantics: projection is the relational
/// image, intersection/union are set operations and negation is the
/// complement within the entity set.
pub fn brute_force_answers(graph: &Graph, q: &QueryDag, closure: Closure) -> BTreeSet<EntityId> {
    match closure {
        Closure::Raw => eval_node(graph, q, q.root()),
        Closure::TransitiveClosed => {
            let closed = graph.transitively_closed();
            eval_node(&closed, q, q.root())
        }
    }
}

fn eval_node(g: &Graph, q: &QueryDag, id: NodeId) -> BTreeSet<EntityId> {
    match q.node(id) {
        Node::Anchor(e) => BTreeSet::from([*e]),
        Node::Projection { relation, child } => g.image(&eval_node(g, q, *child), *relation),
        Node::Intersection(kids) => {
            let mut sets = kids.iter().map(|&k| eval_node(g, q, k));
            let first = sets.next().unwrap_or_default();
            sets.fold(first, |acc, s| acc.intersection(&s).copied().collect())
        }
        Node::Union(kids) => kids.iter().flat_map(|&k| eval_node(g, q, k)).collect(),
        Node::Negation(child) => {
            let inner = eval_node(g, q, *child);
            (0..g.num_entities as u32).map(EntityId).filter(|e| !inner.contains(e)).collect()
        }
    }
}

/// Synthetic graph parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n_entities: usize,
    /// Total relation count; the first `n_transitive` ids are transitive.
    pub n_relations: usize,
    pub n_transitive: usize,
    /// Nodes per transitive chain.
    pub chain_length: usize,
    /// Chains per transitive relation; 0 means `n_entities / (2 * chain_length)`.
    pub chains_per_relation: usize,
    /// Probability of an edge between an entity and each member of the
    /// target cluster of a non-transitive relation.
    pub density: f64,
    pub cluster_size: usize,
    /// Fraction of transitive closure edges (distance >= 2) kept in train.
    pub closure_train_fraction: f64,
    pub valid_fraction: f64,
    pub test_fraction: f64,
    /// Add an inverse relation for every transitive relation.
    pub transitive_inverses: bool,
    /// Queries per non-1p type in the train split; 1p covers every (head, relation).
    pub train_queries_per_type: usize,
    pub eval_queries_per_type: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_entities: 200,
            n_relations: 4,
            n_transitive: 1,
            chain_length: 4,
            chains_per_relation: 0,
            density: 0.4,
            cluster_size: 5,
            closure_train_fraction: 0.5,
            valid_fraction: 0.1,
            test_fraction: 0.1,
            transitive_inverses: false,
            train_queries_per_type: 200,
            eval_queries_per_type: 50,
            seed: 0,
        }
    }
}

struct Sampler<'a> {
    graph: &'a Graph,
    incoming: BTreeMap<EntityId, Vec<(EntityId, RelationId)>>,
    outgoing: BTreeMap<EntityId, Vec<(RelationId, EntityId)>>,
    edges: Vec<Triple>,
    /// Edges first added in the split being sampled.
    fresh: Vec<Triple>,
}

impl<'a> Sampler<'a> {
    fn new(graph: &'a Graph, fresh: Vec<Triple>) -> Self {
        let mut incoming: BTreeMap<EntityId, Vec<_>> = BTreeMap::new();
        let mut outgoing: BTreeMap<EntityId, Vec<_>> = BTreeMap::new();
        let edges: Vec<Triple> = graph.triples().collect();
        for t in &edges {
            incoming.entry(t.tail).or_default().push((t.head, t.relation));
            outgoing.entry(t.head).or_default().push((t.relation, t.tail));
        }
        Self { graph, incoming, outgoing, edges, fresh }
    }

    fn edge(&self, rng: &mut ChaCha8Rng, fresh: bool) -> Option<Triple> {
        let pool = if fresh { &self.fresh } else { &self.edges };
        pool.choose(rng).copied()
    }

    /// Backward walk of `len` hops ending at `target`; returns the anchor and
    /// relations in forward order.
    fn path_to(&self, rng: &mut ChaCha8Rng, target: EntityId, len: usize) -> Option<(EntityId, Vec<RelationId>)> {
        let mut at = target;
        let mut rels = Vec::with_capacity(len);
        for _ in 0..len {
            let &(h, r) = self.incoming.get(&at)?.choose(rng)?;
            rels.push(r);
            at = h;
        }
        rels.reverse();
        Some((at, rels))
    }

    /// A path whose last hop is a random (optionally split-fresh) edge.
    fn path_ending_fresh(&self, rng: &mut ChaCha8Rng, len: usize, fresh: bool) -> Option<(EntityId, Vec<RelationId>, EntityId)> {
        let last = self.edge(rng, fresh)?;
        let (anchor, mut rels) = self.path_to(rng, last.head, len - 1)?;
        rels.push(last.relation);
        Some((anchor, rels, last.tail))
    }

    fn step_from(&self, rng: &mut ChaCha8Rng, from: EntityId) -> Option<(RelationId, EntityId)> {
        self.outgoing.get(&from)?.choose(rng).copied()
    }

    fn any_in_set(&self, rng: &mut ChaCha8Rng, q: &QueryDag, exclude: EntityId) -> Option<EntityId> {
        let answers: Vec<EntityId> =
            brute_force_answers(self.graph, q, Closure::Raw).into_iter().filter(|&e| e != exclude).collect();
        answers.choose(rng).copied()
    }

    /// Proposes anchors and relation chains for `ty` grounded in the graph.
    fn propose(&self, rng: &mut ChaCha8Rng, ty: QueryType, fresh: bool) -> Option<(Vec<EntityId>, Vec<Vec<RelationId>>)> {
        use QueryType::*;
        let hop = |rng: &mut ChaCha8Rng, t: EntityId| self.path_to(rng, t, 1);
        Some(match ty {
            P1 | P2 | P3 => {
                let len = match ty {
                    P1 => 1,
                    P2 => 2,
                    _ => 3,
                };
                let (a, rels, _) = self.path_ending_fresh(rng, len, fresh)?;
                (vec![a], vec![rels])
            }
            I2 | I3 => {
                let (a0, r0, t) = self.path_ending_fresh(rng, 1, fresh)?;
                let mut anchors = vec![a0];
                let mut rels = vec![r0];
                let k = if ty == I2 { 2 } else { 3 };
                while anchors.len() < k {
                    let (a, r) = hop(rng, t)?;
                    anchors.push(a);
                    rels.push(r);
                }
                (anchors, rels)
            }
            Pi => {
                let (a0, r0, t) = self.path_ending_fresh(rng, 2, fresh)?;
                let (a1, r1) = hop(rng, t)?;
                (vec![a0, a1], vec![r0, r1])
            }
            Ip | Inp => {
                let last = self.edge(rng, fresh)?;
                let (a0, r0) = hop(rng, last.head)?;
                let (a1, r1) = if ty == Ip {
                    hop(rng, last.head)?
                } else {
                    let pos = QueryDag::build(P1, &[a0], &[r0.clone()]).ok()?;
                    let x = self.any_in_set(rng, &pos, last.head)?;
                    hop(rng, x)?
                };
                (vec![a0, a1], vec![r0, r1, vec![last.relation]])
            }
            U2 => {
                let (a0, r0, _) = self.path_ending_fresh(rng, 1, fresh)?;
                let other = self.edge(rng, false)?;
                (vec![a0, other.head], vec![r0, vec![other.relation]])
            }
            Up => {
                let (a0, r0, m) = self.path_ending_fresh(rng, 1, false)?;
                let (r2, _) = self.step_from(rng, m)?;
                let other = self.edge(rng, false)?;
                (vec![a0, other.head], vec![r0, vec![other.relation], vec![r2]])
            }
            In2 | In3 | Pin => {
                let len = if ty == Pin { 2 } else { 1 };
                let (a0, r0, t) = self.path_ending_fresh(rng, len, fresh)?;
                let mut anchors = vec![a0];
                let mut rels = vec![r0.clone()];
                if ty == In3 {
                    let (a, r) = hop(rng, t)?;
                    anchors.push(a);
                    rels.push(r);
                }
                let pos = QueryDag::build(if ty == Pin { P2 } else { P1 }, &[a0], &[r0]).ok()?;
                let x = self.any_in_set(rng, &pos, t)?;
                let (an, rn) = hop(rng, x)?;
                anchors.push(an);
                rels.push(rn);
                (anchors, rels)
            }
            Pni => {
                let (a1, r1, t) = self.path_ending_fresh(rng, 1, fresh)?;
                let pos = QueryDag::build(P1, &[a1], &[r1.clone()]).ok()?;
                let x = self.any_in_set(rng, &pos, t)?;
                let (a0, r0) = self.path_to(rng, x, 2)?;
                (vec![a0, a1], vec![r0, r1])
            }
        })
    }
}

/// Generates a synthetic dataset: transitive relations as disjoint chains with
/// part of their closure held out to the test split, and clustered
/// non-transitive relations.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<Dataset> {
    if cfg.n_transitive > cfg.n_relations {
        return Err(gen_err("n_transitive exceeds n_relations"));
    }
    if cfg.n_transitive >= 1 && cfg.chain_length < 3 {
        return Err(gen_err("chain_length must be at least 3 when transitive relations are requested"));
    }
    if cfg.n_entities < 2 || cfg.cluster_size == 0 || !(0.0..=1.0).contains(&cfg.density) {
        return Err(gen_err("need at least 2 entities, a positive cluster size and density in [0, 1]"));
    }
    let chains = if cfg.chains_per_relation == 0 {
        cfg.n_entities / (2 * cfg.chain_length.max(1))
    } else {
        cfg.chains_per_relation
    };
    if cfg.n_transitive > 0 && (chains == 0 || chains * cfg.chain_length > cfg.n_entities) {
        return Err(gen_err("not enough entities for the requested chains"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let entities: Vec<String> = (0..cfg.n_entities).map(|k| format!("entity_{k}")).collect();
    let mut relations: Vec<RelationMeta> = (0..cfg.n_relations)
        .map(|k| RelationMeta {
            name: if k < cfg.n_transitive { format!("transitive_{k}") } else { format!("relation_{k}") },
            transitive: k < cfg.n_transitive,
            inverse_of: None,
        })
        .collect();
    if cfg.transitive_inverses {
        for k in 0..cfg.n_transitive {
            let inv = RelationId(relations.len() as u32);
            relations[k].inverse_of = Some(inv);
            relations.push(RelationMeta {
                name: format!("transitive_{k}_inverse"),
                transitive: true,
                inverse_of: Some(RelationId(k as u32)),
            });
        }
    }

    let mut split_of: BTreeMap<Triple, Split> = BTreeMap::new();
    let all: Vec<u32> = (0..cfg.n_entities as u32).collect();
    for k in 0..cfg.n_transitive {
        let r = k as u32;
        let mut perm = all.clone();
        perm.shuffle(&mut rng);
        for chain in perm.chunks(cfg.chain_length).take(chains) {
            for i in 0..chain.len() {
                for j in i + 1..chain.len() {
                    let split = if j == i + 1 || rng.gen_bool(cfg.closure_train_fraction) {
                        Split::Train
                    } else {
                        Split::Test
                    };
                    split_of.insert(Triple::new(chain[i], r, chain[j]), split);
                    if cfg.transitive_inverses {
                        let inv = relations[k].inverse_of.expect("inverse added").0;
                        split_of.insert(Triple::new(chain[j], inv, chain[i]), split);
                    }
                }
            }
        }
    }

    let mut perm = all.clone();
    perm.shuffle(&mut rng);
    let clusters: Vec<Vec<u32>> = perm.chunks(cfg.cluster_size).map(|c| c.to_vec()).collect();
    for r in cfg.n_transitive as u32..cfg.n_relations as u32 {
        let targets: Vec<usize> = (0..clusters.len()).map(|_| rng.gen_range(0..clusters.len())).collect();
        for (c, members) in clusters.iter().enumerate() {
            for &h in members {
                for &t in &clusters[targets[c]] {
                    if h != t && rng.gen_bool(cfg.density) {
                        let u: f64 = rng.gen();
                        let split = if u < cfg.test_fraction {
                            Split::Test
                        } else if u < cfg.test_fraction + cfg.valid_fraction {
                            Split::Valid
                        } else {
                            Split::Train
                        };
                        split_of.insert(Triple::new(h, r, t), split);
                    }
                }
            }
        }
    }

    let pick = |s: Split| split_of.iter().filter(|(_, &v)| v == s).map(|(&t, _)| t).collect::<Vec<_>>();
    let kg = KnowledgeGraph { entities, train: pick(Split::Train), valid: pick(Split::Valid), test: pick(Split::Test), relations };
    if kg.train.is_empty() {
        return Err(gen_err("no training triples; density too low"));
    }

    let graphs = [kg.graph_up_to(Split::Train), kg.graph_up_to(Split::Valid), kg.graph_up_to(Split::Test)];
    let cap = cfg.n_entities / 2;
    let mut splits = Vec::new();
    for split in Split::ALL {
        let g = &graphs[split as usize];
        let sampler = Sampler::new(g, kg.split_triples(split).to_vec());
        let types: &[QueryType] = if split == Split::Train { &QueryType::TRAINING } else { &QueryType::ALL };
        let mut queries = Vec::new();
        let mut seen: HashSet<(QueryType, Vec<EntityId>, Vec<Vec<RelationId>>)> = HashSet::new();

        let answers_of = |dag: &QueryDag| SplitAnswers {
            train: brute_force_answers(&graphs[0], dag, Closure::Raw),
            valid: brute_force_answers(&graphs[1], dag, Closure::Raw),
            test: brute_force_answers(&graphs[2], dag, Closure::Raw),
        };
        let acceptable = |a: &SplitAnswers| {
            a.inclusion_holds() && !a.hard(split).is_empty() && a.test.len() <= cap && !a.get(split).is_empty()
        };

        for &ty in types {
            let mut made = 0;
            if split == Split::Train && ty == QueryType::P1 {
                let pairs: BTreeSet<(EntityId, RelationId)> =
                    kg.train.iter().map(|t| (t.head, t.relation)).collect();
                for (h, r) in pairs {
                    let q = DatasetQuery::new(vec![h], vec![vec![r]], ty, SplitAnswers::default())?;
                    let answers = answers_of(&q.dag);
                    if acceptable(&answers) {
                        queries.push(DatasetQuery { answers, ..q });
                        made += 1;
                    }
                }
            } else {
                let wanted = if split == Split::Train { cfg.train_queries_per_type } else { cfg.eval_queries_per_type };
                let mut attempts = 0;
                while made < wanted && attempts < wanted * 200 {
                    attempts += 1;
                    let Some((anchors, rels)) = sampler.propose(&mut rng, ty, split != Split::Train) else {
                        continue;
                    };
                    if !seen.insert((ty, anchors.clone(), rels.clone())) {
                        continue;
                    }
                    let q = DatasetQuery::new(anchors, rels, ty, SplitAnswers::default())?;
                    let answers = answers_of(&q.dag);
                    if acceptable(&answers) {
                        queries.push(DatasetQuery { answers, ..q });
                        made += 1;
                    }
                }
                if made < wanted {
                    log::warn!("{} {}: generated {made} of {wanted} queries", split.as_str(), ty);
                }
            }
            if made == 0 {
                return Err(gen_err(format!(
                    "could not generate any {} query for the {} split; density too low",
                    ty,
                    split.as_str()
                )));
            }
        }
        splits.push(queries);
    }
    let test = splits.pop().expect("three splits");
    let valid = splits.pop().expect("three splits");
    let train = splits.pop().expect("three splits");
    Ok(Dataset { kg, train, valid, test })
}
