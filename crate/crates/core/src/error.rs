use std::path::PathBuf;

use thiserror::Error;

use crate::ids::{EntityId, RelationId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("corner order violated in dimension {dim}: lower {lower} > upper {upper}")]
    CornerOrder { dim: usize, lower: f64, upper: f64 },
    #[error("intersection needs at least one box")]
    EmptyInput,
    #[error("dimension index {index} out of range for a {dim}-dimensional box with residual dimensions")]
    DimensionOutOfRange { index: usize, dim: usize },
    #[error("boxes overlap; complement check requires disjoint boxes")]
    BoxesOverlap,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueryError {
    #[error("malformed query record: {0}")]
    Malformed(String),
    #[error("unknown query type {0:?}")]
    UnknownType(String),
    #[error("unknown entity {entity} in {node}")]
    UnknownEntity { entity: EntityId, node: String },
    #[error("unknown relation {relation} in {node}")]
    UnknownRelation { relation: RelationId, node: String },
    #[error("shape mismatch for type {declared}: {detail}")]
    ShapeMismatch { declared: String, detail: String },
    #[error("unsupported query: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("transitive relations need {needed} dimensions but the store has {dim}")]
    Capacity { needed: usize, dim: usize },
    #[error("duplicate relation {0} in transitive assignment")]
    DuplicateRelation(RelationId),
    #[error("invalid store configuration: {0}")]
    Config(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("checkpoint config mismatch: {0}")]
    ConfigMismatch(String),
    #[error("unknown {kind} id {id}")]
    UnknownId { kind: &'static str, id: u32 },
    #[error("relation {0} is not transitive")]
    NotTransitive(RelationId),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("no entity outside the exclusion set can be sampled")]
    Unsampleable,
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("non-finite {what} at step {step} (batch {batch}, parameter block {block})")]
    NonFinite { what: &'static str, step: usize, batch: usize, block: &'static str },
    #[error("empty batch")]
    EmptyBatch,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{file}:{line}: {message}")]
    Validation { file: PathBuf, line: usize, message: String },
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("generation error: {0}")]
    Generation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Crate-wide error used at the CLI boundary.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}
