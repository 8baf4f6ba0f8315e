//! Typed query shapes, negation approximation and compilation into boxes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::QueryError;
use crate::geometry::{self, Corners, Region, TransitiveSlot};
use crate::ids::{EntityId, RelationId};
use crate::store::EmbeddingStore;

type Result<T> = std::result::Result<T, QueryError>;

/// The 14 supported query shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QueryType {
    #[serde(rename = "1p")]
    P1,
    #[serde(rename = "2p")]
    P2,
    #[serde(rename = "3p")]
    P3,
    #[serde(rename = "2i")]
    I2,
    #[serde(rename = "3i")]
    I3,
    #[serde(rename = "pi")]
    Pi,
    #[serde(rename = "ip")]
    Ip,
    #[serde(rename = "2u")]
    U2,
    #[serde(rename = "up")]
    Up,
    #[serde(rename = "2in")]
    In2,
    #[serde(rename = "3in")]
    In3,
    #[serde(rename = "inp")]
    Inp,
    #[serde(rename = "pin")]
    Pin,
    #[serde(rename = "pni")]
    Pni,
}

impl QueryType {
    pub const ALL: [QueryType; 14] = [
        QueryType::P1,
        QueryType::P2,
        QueryType::P3,
        QueryType::I2,
        QueryType::I3,
        QueryType::Pi,
        QueryType::Ip,
        QueryType::U2,
        QueryType::Up,
        QueryType::In2,
        QueryType::In3,
        QueryType::Inp,
        QueryType::Pin,
        QueryType::Pni,
    ];

    /// Types present in training and validation splits.
    pub const TRAINING: [QueryType; 10] = [
        QueryType::P1,
        QueryType::P2,
        QueryType::P3,
        QueryType::I2,
        QueryType::I3,
        QueryType::In2,
        QueryType::In3,
        QueryType::Inp,
        QueryType::Pin,
        QueryType::Pni,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QueryType::P1 => "1p",
            QueryType::P2 => "2p",
            QueryType::P3 => "3p",
            QueryType::I2 => "2i",
            QueryType::I3 => "3i",
            QueryType::Pi => "pi",
            QueryType::Ip => "ip",
            QueryType::U2 => "2u",
            QueryType::Up => "up",
            QueryType::In2 => "2in",
            QueryType::In3 => "3in",
            QueryType::Inp => "inp",
            QueryType::Pin => "pin",
            QueryType::Pni => "pni",
        }
    }

    pub fn has_negation(self) -> bool {
        matches!(self, QueryType::In2 | QueryType::In3 | QueryType::Inp | QueryType::Pin | QueryType::Pni)
    }

    /// Positive shape a negation type is approximated by; identity otherwise.
    pub fn approximation(self) -> QueryType {
        match self {
            QueryType::In2 => QueryType::P1,
            QueryType::In3 => QueryType::I2,
            QueryType::Pni => QueryType::P1,
            QueryType::Inp => QueryType::P2,
            QueryType::Pin => QueryType::P2,
            other => other,
        }
    }

    /// Number of anchors and the relation-chain length of every branch in the
    /// record layout. Shapes that project after merging (`ip`, `up`, `inp`)
    /// carry the post-merge chain as the last branch.
    pub fn layout(self) -> (usize, &'static [usize]) {
        match self {
            QueryType::P1 => (1, &[1]),
            QueryType::P2 => (1, &[2]),
            QueryType::P3 => (1, &[3]),
            QueryType::I2 | QueryType::U2 | QueryType::In2 => (2, &[1, 1]),
            QueryType::I3 | QueryType::In3 => (3, &[1, 1, 1]),
            QueryType::Pi | QueryType::Pin | QueryType::Pni => (2, &[2, 1]),
            QueryType::Ip | QueryType::Up | QueryType::Inp => (2, &[1, 1, 1]),
        }
    }
}

impl fmt::Display for QueryType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QueryType {
    type Err = QueryError;

    fn from_str(s: &str) -> Result<Self> {
        QueryType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| QueryError::UnknownType(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Anchor(EntityId),
    Projection { relation: RelationId, child: NodeId },
    Intersection(Vec<NodeId>),
    Union(Vec<NodeId>),
    Negation(NodeId),
}

/// A validated query DAG. Children always precede their parents in `nodes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryDag {
    nodes: Vec<Node>,
    root: NodeId,
    query_type: QueryType,
}

/// On-disk query record (one JSON line).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    #[serde(rename = "type")]
    pub query_type: String,
    #[serde(default, alias = "anchor", deserialize_with = "one_or_many")]
    pub anchors: Vec<u32>,
    #[serde(default, deserialize_with = "branches")]
    pub rels: Vec<Vec<u32>>,
    #[serde(default)]
    pub answers_train: Vec<u32>,
    #[serde(default)]
    pub answers_valid: Vec<u32>,
    #[serde(default)]
    pub answers_test: Vec<u32>,
}

fn one_or_many<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Vec<u32>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(u32),
        Many(Vec<u32>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(v) => v,
    })
}

fn branches<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Vec<Vec<u32>>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Branches {
        Flat(Vec<u32>),
        Nested(Vec<Vec<u32>>),
    }
    Ok(match Branches::deserialize(d)? {
        Branches::Flat(v) => vec![v],
        Branches::Nested(v) => v,
    })
}

/// Parses a record into a DAG, checking arity and id bounds.
pub fn parse_query(record: &QueryRecord, num_entities: usize, num_relations: usize) -> Result<QueryDag> {
    let ty: QueryType = record.query_type.parse()?;
    let anchors: Vec<EntityId> = record.anchors.iter().map(|&e| EntityId(e)).collect();
    let rels: Vec<Vec<RelationId>> =
        record.rels.iter().map(|b| b.iter().map(|&r| RelationId(r)).collect()).collect();
    for (k, &e) in anchors.iter().enumerate() {
        if e.index() >= num_entities {
            return Err(QueryError::UnknownEntity { entity: e, node: format!("anchor {k}") });
        }
    }
    for (b, branch) in rels.iter().enumerate() {
        for (j, &r) in branch.iter().enumerate() {
            if r.index() >= num_relations {
                return Err(QueryError::UnknownRelation {
                    relation: r,
                    node: format!("branch {b} projection {j}"),
                });
            }
        }
    }
    QueryDag::build(ty, &anchors, &rels)
}

struct Builder {
    nodes: Vec<Node>,
}

impl Builder {
    fn push(&mut self, node: Node) -> NodeId {
        self.nodes.push(node);
        NodeId(self.nodes.len() - 1)
    }

    fn chain(&mut self, anchor: EntityId, rels: &[RelationId]) -> NodeId {
        let mut id = self.push(Node::Anchor(anchor));
        for &r in rels {
            id = self.push(Node::Projection { relation: r, child: id });
        }
        id
    }

    fn project_all(&mut self, mut id: NodeId, rels: &[RelationId]) -> NodeId {
        for &r in rels {
            id = self.push(Node::Projection { relation: r, child: id });
        }
        id
    }
}

impl QueryDag {
    /// Builds the canonical DAG for `ty` from anchors and per-branch relation chains.
    pub fn build(ty: QueryType, anchors: &[EntityId], rels: &[Vec<RelationId>]) -> Result<Self> {
        let (n_anchors, lens) = ty.layout();
        let actual: Vec<usize> = rels.iter().map(Vec::len).collect();
        if anchors.len() != n_anchors || actual != lens {
            return Err(QueryError::ShapeMismatch {
                declared: ty.to_string(),
                detail: format!(
                    "expected {n_anchors} anchors and branch lengths {lens:?}, got {} anchors and {actual:?}",
                    anchors.len()
                ),
            });
        }
        let mut b = Builder { nodes: Vec::new() };
        let root = match ty {
            QueryType::P1 | QueryType::P2 | QueryType::P3 => b.chain(anchors[0], &rels[0]),
            QueryType::I2 | QueryType::I3 | QueryType::Pi => {
                let kids = anchors.iter().zip(rels).map(|(&a, r)| b.chain(a, r)).collect();
                b.push(Node::Intersection(kids))
            }
            QueryType::U2 => {
                let kids = anchors.iter().zip(rels).map(|(&a, r)| b.chain(a, r)).collect();
                b.push(Node::Union(kids))
            }
            QueryType::Ip | QueryType::Up => {
                let kids = anchors.iter().zip(rels).map(|(&a, r)| b.chain(a, r)).collect();
                let merged =
                    b.push(if ty == QueryType::Ip { Node::Intersection(kids) } else { Node::Union(kids) });
                b.project_all(merged, &rels[2])
            }
            QueryType::In2 | QueryType::In3 | QueryType::Pin => {
                let mut kids: Vec<NodeId> = anchors.iter().zip(rels).map(|(&a, r)| b.chain(a, r)).collect();
                let last = kids.pop().expect("layout has branches");
                let neg = b.push(Node::Negation(last));
                kids.push(neg);
                b.push(Node::Intersection(kids))
            }
            QueryType::Pni => {
                let first = b.chain(anchors[0], &rels[0]);
                let neg = b.push(Node::Negation(first));
                let second = b.chain(anchors[1], &rels[1]);
                b.push(Node::Intersection(vec![neg, second]))
            }
            QueryType::Inp => {
                let pos = b.chain(anchors[0], &rels[0]);
                let other = b.chain(anchors[1], &rels[1]);
                let neg = b.push(Node::Negation(other));
                let merged = b.push(Node::Intersection(vec![pos, neg]));
                b.project_all(merged, &rels[2])
            }
        };
        Ok(Self { nodes: b.nodes, root, query_type: ty })
    }

    /// Validates an arbitrary node list against a declared type.
    pub fn from_nodes(nodes: Vec<Node>, root: NodeId, declared: QueryType) -> Result<Self> {
        if root.0 >= nodes.len() {
            return Err(QueryError::Malformed(format!("root {} out of range", root.0)));
        }
        for (k, node) in nodes.iter().enumerate() {
            let kids: &[NodeId] = match node {
                Node::Anchor(_) => &[],
                Node::Projection { child, .. } | Node::Negation(child) => std::slice::from_ref(child),
                Node::Intersection(c) | Node::Union(c) => {
                    if c.is_empty() {
                        return Err(QueryError::Malformed(format!("node {k} has no children")));
                    }
                    c
                }
            };
            if let Some(c) = kids.iter().find(|c| c.0 >= k) {
                return Err(QueryError::Malformed(format!(
                    "node {k} refers to node {} which does not precede it",
                    c.0
                )));
            }
        }
        let dag = Self { nodes, root, query_type: declared };
        match dag.infer_type() {
            Some(t) if t == declared => Ok(dag.compacted()),
            Some(t) => Err(QueryError::ShapeMismatch {
                declared: declared.to_string(),
                detail: format!("structure is {t}"),
            }),
            None => Err(QueryError::ShapeMismatch {
                declared: declared.to_string(),
                detail: "structure matches none of the supported shapes".into(),
            }),
        }
    }

    pub fn query_type(&self) -> QueryType {
        self.query_type
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn anchors(&self) -> Vec<EntityId> {
        let mut out = Vec::new();
        self.walk(self.root, &mut |n| {
            if let Node::Anchor(e) = n {
                out.push(*e);
            }
        });
        out
    }

    pub fn relations(&self) -> Vec<RelationId> {
        let mut out = Vec::new();
        self.walk(self.root, &mut |n| {
            if let Node::Projection { relation, .. } = n {
                out.push(*relation);
            }
        });
        out
    }

    fn walk(&self, id: NodeId, f: &mut impl FnMut(&Node)) {
        let node = self.node(id);
        match node {
            Node::Anchor(_) => {}
            Node::Projection { child, .. } | Node::Negation(child) => self.walk(*child, f),
            Node::Intersection(c) | Node::Union(c) => c.iter().for_each(|&k| self.walk(k, f)),
        }
        f(node);
    }

    fn compacted(&self) -> Self {
        let mut b = Builder { nodes: Vec::new() };
        let root = self.copy_into(self.root, &mut b);
        Self { nodes: b.nodes, root, query_type: self.query_type }
    }

    fn copy_into(&self, id: NodeId, b: &mut Builder) -> NodeId {
        match self.node(id) {
            Node::Anchor(e) => b.push(Node::Anchor(*e)),
            Node::Projection { relation, child } => {
                let c = self.copy_into(*child, b);
                b.push(Node::Projection { relation: *relation, child: c })
            }
            Node::Negation(child) => {
                let c = self.copy_into(*child, b);
                b.push(Node::Negation(c))
            }
            Node::Intersection(kids) => {
                let c = kids.iter().map(|&k| self.copy_into(k, b)).collect();
                b.push(Node::Intersection(c))
            }
            Node::Union(kids) => {
                let c = kids.iter().map(|&k| self.copy_into(k, b)).collect();
                b.push(Node::Union(c))
            }
        }
    }

    /// Length of the projection chain starting at `id` if it ends in an anchor.
    fn path_len(&self, id: NodeId) -> Option<usize> {
        match self.node(id) {
            Node::Anchor(_) => Some(0),
            Node::Projection { child, .. } => self.path_len(*child).map(|n| n + 1),
            _ => None,
        }
    }

    fn negated_path_len(&self, id: NodeId) -> Option<usize> {
        match self.node(id) {
            Node::Negation(child) => self.path_len(*child),
            _ => None,
        }
    }

    /// Recognizes the shape of the DAG.
    pub fn infer_type(&self) -> Option<QueryType> {
        use QueryType::*;
        match self.node(self.root) {
            Node::Anchor(_) | Node::Negation(_) => None,
            Node::Projection { child, .. } => {
                if let Some(n) = self.path_len(self.root) {
                    return match n {
                        1 => Some(P1),
                        2 => Some(P2),
                        3 => Some(P3),
                        _ => None,
                    };
                }
                match self.node(*child) {
                    Node::Intersection(k) if k.len() == 2 => {
                        let a = self.path_len(k[0]);
                        match (a, self.path_len(k[1]), self.negated_path_len(k[1])) {
                            (Some(1), Some(1), _) => Some(Ip),
                            (Some(1), None, Some(1)) => Some(Inp),
                            _ => None,
                        }
                    }
                    Node::Union(k) if k.len() == 2 => {
                        (self.path_len(k[0]) == Some(1) && self.path_len(k[1]) == Some(1)).then_some(Up)
                    }
                    _ => None,
                }
            }
            Node::Union(k) => {
                (k.len() == 2 && k.iter().all(|&c| self.path_len(c) == Some(1))).then_some(U2)
            }
            Node::Intersection(k) => {
                let pos: Vec<Option<usize>> = k.iter().map(|&c| self.path_len(c)).collect();
                let neg: Vec<Option<usize>> = k.iter().map(|&c| self.negated_path_len(c)).collect();
                match (k.len(), pos.as_slice(), neg.as_slice()) {
                    (2, [Some(1), Some(1)], _) => Some(I2),
                    (3, [Some(1), Some(1), Some(1)], _) => Some(I3),
                    (2, [Some(2), Some(1)], _) => Some(Pi),
                    (2, [Some(1), None], [_, Some(1)]) => Some(In2),
                    (3, [Some(1), Some(1), None], [_, _, Some(1)]) => Some(In3),
                    (2, [Some(2), None], [_, Some(1)]) => Some(Pin),
                    (2, [None, Some(1)], [Some(2), _]) => Some(Pni),
                    _ => None,
                }
            }
        }
    }

    /// Replaces every negated conjunct by dropping it from its intersection.
    ///
    /// The result is the positive shape the negation type approximates
    /// (`2in -> 1p`, `3in -> 2i`, `pni -> 1p`, `inp -> 2p`, `pin -> 2p`);
    /// positive queries are returned unchanged.
    pub fn rewrite_negation(&self) -> Result<QueryDag> {
        if !self.query_type.has_negation() {
            return Ok(self.clone());
        }
        let mut b = Builder { nodes: Vec::new() };
        let root = self.rewrite_node(self.root, &mut b)?;
        let out = QueryDag { nodes: b.nodes, root, query_type: self.query_type.approximation() };
        match out.infer_type() {
            Some(t) if t == out.query_type => Ok(out),
            other => Err(QueryError::Unsupported(format!(
                "rewriting {} produced {:?}",
                self.query_type, other
            ))),
        }
    }

    fn rewrite_node(&self, id: NodeId, b: &mut Builder) -> Result<NodeId> {
        match self.node(id) {
            Node::Anchor(e) => Ok(b.push(Node::Anchor(*e))),
            Node::Projection { relation, child } => {
                let c = self.rewrite_node(*child, b)?;
                Ok(b.push(Node::Projection { relation: *relation, child: c }))
            }
            Node::Intersection(kids) => {
                let mut kept = Vec::new();
                for &k in kids {
                    if !matches!(self.node(k), Node::Negation(_)) {
                        kept.push(self.rewrite_node(k, b)?);
                    }
                }
                match kept.len() {
                    0 => Err(QueryError::Unsupported("intersection of negations only".into())),
                    1 => Ok(kept[0]),
                    _ => Ok(b.push(Node::Intersection(kept))),
                }
            }
            Node::Union(kids) => {
                let c = kids.iter().map(|&k| self.rewrite_node(k, b)).collect::<Result<_>>()?;
                Ok(b.push(Node::Union(c)))
            }
            Node::Negation(_) => {
                Err(QueryError::Unsupported("negation outside an intersection".into()))
            }
        }
    }

    /// Expands unions into a list of negation-free, union-free conjunctive trees.
    pub fn to_dnf(&self) -> Result<Vec<Conjunctive>> {
        self.dnf_node(self.root)
    }

    fn dnf_node(&self, id: NodeId) -> Result<Vec<Conjunctive>> {
        Ok(match self.node(id) {
            Node::Anchor(e) => vec![Conjunctive::Anchor(*e)],
            Node::Projection { relation, child } => self
                .dnf_node(*child)?
                .into_iter()
                .map(|c| Conjunctive::Projection(*relation, Box::new(c)))
                .collect(),
            Node::Union(kids) => {
                let mut out = Vec::new();
                for &k in kids {
                    out.extend(self.dnf_node(k)?);
                }
                out
            }
            Node::Intersection(kids) => {
                let mut acc: Vec<Vec<Conjunctive>> = vec![Vec::new()];
                for &k in kids {
                    let options = self.dnf_node(k)?;
                    acc = acc
                        .into_iter()
                        .flat_map(|prefix| {
                            options.iter().map(move |o| {
                                let mut p = prefix.clone();
                                p.push(o.clone());
                                p
                            })
                        })
                        .collect();
                }
                acc.into_iter().map(Conjunctive::Intersection).collect()
            }
            Node::Negation(_) => {
                return Err(QueryError::Unsupported(
                    "negation must be rewritten before compilation".into(),
                ))
            }
        })
    }
}

/// A union-free, negation-free query tree: one disjunct of the DNF.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Conjunctive {
    Anchor(EntityId),
    Projection(RelationId, Box<Conjunctive>),
    Intersection(Vec<Conjunctive>),
}

impl Conjunctive {
    /// Relation of the outermost projection, if the tree ends in one.
    pub fn final_relation(&self) -> Option<RelationId> {
        match self {
            Conjunctive::Projection(r, _) => Some(*r),
            _ => None,
        }
    }
}

/// One disjunct box and the ordering coordinate used to score it.
#[derive(Debug, Clone, PartialEq)]
pub struct Disjunct {
    pub region: Region,
    pub transitive: Option<TransitiveSlot>,
}

/// A query compiled to one region per DNF disjunct.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledQuery {
    disjuncts: Vec<Disjunct>,
}

impl CompiledQuery {
    pub fn new(disjuncts: Vec<Disjunct>) -> Result<Self> {
        let n = disjuncts
            .first()
            .map(|d| d.region.dim())
            .ok_or_else(|| QueryError::Malformed("compiled query needs a disjunct".into()))?;
        if let Some(d) = disjuncts.iter().find(|d| d.region.dim() != n) {
            return Err(geometry_mismatch(n, d.region.dim()));
        }
        Ok(Self { disjuncts })
    }

    pub fn disjuncts(&self) -> &[Disjunct] {
        &self.disjuncts
    }

    pub fn dim(&self) -> usize {
        self.disjuncts[0].region.dim()
    }

    /// Ordering coordinate of the first disjunct that has one.
    pub fn transitive_dim(&self) -> Option<usize> {
        self.disjuncts.iter().find_map(|d| d.transitive.map(|s| s.dim))
    }

    /// Adds another disjunct (used for tests of union monotonicity).
    pub fn with_disjunct(mut self, d: Disjunct) -> Result<Self> {
        if d.region.dim() != self.dim() {
            return Err(geometry_mismatch(self.dim(), d.region.dim()));
        }
        self.disjuncts.push(d);
        Ok(self)
    }
}

fn geometry_mismatch(expected: usize, found: usize) -> QueryError {
    QueryError::Geometry(crate::error::GeometryError::DimensionMismatch { expected, found })
}

/// Evaluates one conjunctive tree to a region using the store's parameters.
pub fn evaluate_conjunctive(tree: &Conjunctive, store: &EmbeddingStore) -> Result<Region> {
    Ok(match tree {
        Conjunctive::Anchor(e) => Region::Box(store.entity_box(*e).ok_or_else(|| {
            QueryError::UnknownEntity { entity: *e, node: "anchor".into() }
        })?),
        Conjunctive::Projection(r, child) => {
            let rel = store.relation(*r).ok_or_else(|| QueryError::UnknownRelation {
                relation: *r,
                node: "projection".into(),
            })?;
            let input = evaluate_conjunctive(child, store)?;
            Region::Box(geometry::project_region(&input, &rel)?)
        }
        Conjunctive::Intersection(kids) => {
            let regions = kids.iter().map(|k| evaluate_conjunctive(k, store)).collect::<Result<Vec<_>>>()?;
            geometry::intersect(&regions)?
        }
    })
}

/// Compiles a negation-free query into one region per disjunct.
///
/// A disjunct scores with the ordering distance when its outermost projection
/// is a transitive relation and the store has transitive scoring enabled.
pub fn compile(q: &QueryDag, store: &EmbeddingStore) -> Result<CompiledQuery> {
    compile_dnf(&q.to_dnf()?, store)
}

/// Compiles already-normalized disjuncts.
pub fn compile_dnf(dnf: &[Conjunctive], store: &EmbeddingStore) -> Result<CompiledQuery> {
    let use_transitive = store.scoring().transitive;
    let disjuncts = dnf
        .iter()
        .map(|tree| {
            let region = evaluate_conjunctive(tree, store)?;
            let transitive = if use_transitive {
                tree.final_relation().and_then(|r| store.transitive_slot(r))
            } else {
                None
            };
            Ok(Disjunct { region, transitive })
        })
        .collect::<Result<Vec<_>>>()?;
    CompiledQuery::new(disjuncts)
}

/// Distance of one disjunct to an answer point.
pub fn disjunct_distance(d: &Disjunct, a: &[f64], alpha: f64, lambda: f64) -> f64 {
    let r = match d.transitive {
        Some(slot) => geometry::dist_box_tr(&d.region, a, slot.dim, alpha, lambda, slot.inverse),
        None => geometry::dist_box(&d.region, a, alpha),
    };
    r.expect("compiled disjuncts and answers share the store dimension")
}

/// Minimum distance over disjuncts; lower is better.
pub fn score(cq: &CompiledQuery, a: &[f64], alpha: f64, lambda: f64) -> f64 {
    cq.disjuncts
        .iter()
        .map(|d| disjunct_distance(d, a, alpha, lambda))
        .fold(f64::INFINITY, f64::min)
}
