//! Box embeddings for multi-hop logical query answering over knowledge graphs.
//!
//! Every logical operator is a fixed geometric transformation: relation
//! projection is a coordinate-wise affine map of a box, intersection is the
//! coordinate-wise max/min of corners, negation is approximated by a static
//! query rewrite, and union is kept as separate disjunct boxes. Transitive
//! relations get a reserved coordinate on which answers are ordered instead of
//! contained.
//!
//! Module map:
//! - [`geometry`]: the parameter-free box calculus and distance functions.
//! - [`query`]: the 14 query shapes, negation rewriting, compilation and scoring.
//! - [`store`]: entity/relation parameters and checkpoints.
//! - [`trainer`]: margin loss, transitive regularizer, analytic gradients, Adam.
//! - [`evaluator`]: filtered ranking and per-type MRR.
//! - [`transitivity`]: chain extraction and Spearman chain analysis.
//! - [`dataset`]: portable file formats, synthetic graphs and the exact answer oracle.
//! - [`cli`]: the `geometre` command line.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod evaluator;
pub mod geometry;
pub mod ids;
pub mod query;
pub mod store;
pub mod trainer;
pub mod transitivity;

pub use error::{Error, Result};
pub use geometry::{BoxEmbedding, EmptyBox, Region};
pub use ids::{EntityId, RelationId};
pub use query::{CompiledQuery, QueryDag, QueryType};
pub use store::{EmbeddingStore, ProjectionMode};
