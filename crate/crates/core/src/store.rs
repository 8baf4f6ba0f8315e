//! Parameter container for entity boxes, answer points and relation 4-tuples.
//!
//! Entity offsets are free parameters read through `abs`. In tied mode the
//! answer point of an entity is the center of its query box.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::StoreError;
use crate::geometry::{BoxEmbedding, RelationEmbedding, TransitiveSlot};
use crate::ids::{EntityId, RelationId};

type Result<T> = std::result::Result<T, StoreError>;

const MAGIC: &[u8; 8] = b"GEOMCKPT";
const FORMAT_VERSION: u32 = 1;

/// Which relation components are learned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionMode {
    /// `(r1, r2, r3, r4)` all learned.
    #[default]
    Full,
    /// `(1, r2, 1, r4)`.
    Additive,
    /// `(r1, 0, r3, 0)`.
    Multiplicative,
}

impl ProjectionMode {
    pub fn learns_scale(self) -> bool {
        self != ProjectionMode::Additive
    }

    pub fn learns_shift(self) -> bool {
        self != ProjectionMode::Multiplicative
    }
}

impl FromStr for ProjectionMode {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(ProjectionMode::Full),
            "additive" => Ok(ProjectionMode::Additive),
            "multiplicative" => Ok(ProjectionMode::Multiplicative),
            other => Err(StoreError::Config(format!("unknown projection mode {other:?}"))),
        }
    }
}

/// Vocabulary entry for a relation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationMeta {
    pub name: String,
    pub transitive: bool,
    pub inverse_of: Option<RelationId>,
}

/// Distance hyperparameters needed to score against the store.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoringConfig {
    pub alpha: f64,
    pub lambda: f64,
    /// Score final transitive projections with the ordering distance.
    pub transitive: bool,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self { alpha: 0.1, lambda: 0.1, transitive: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreConfig {
    pub dim: usize,
    pub projection_mode: ProjectionMode,
    /// Separate answer vectors (`true`) or answers tied to query centers.
    pub answer_embedding: bool,
    /// Margin used to scale the initialization range `gamma / sqrt(dim)`.
    pub gamma: f64,
    pub scoring: ScoringConfig,
}

impl Default for StoreConfig {
    fn default() -> Self {
        Self {
            dim: 32,
            projection_mode: ProjectionMode::Full,
            answer_embedding: false,
            gamma: 1.0,
            scoring: ScoringConfig::default(),
        }
    }
}

/// Assigns one coordinate per transitive relation, shared by inverse pairs.
///
/// Relations are visited in ascending id order and take the next free
/// coordinate unless their partner already has one. Within a pair the larger
/// id uses the inverse ordering.
pub fn assign_transitive_dims(
    relations: &[(RelationId, Option<RelationId>)],
    dim: usize,
) -> Result<BTreeMap<RelationId, TransitiveSlot>> {
    let mut partner: BTreeMap<RelationId, Option<RelationId>> = BTreeMap::new();
    for &(r, inv) in relations {
        if partner.insert(r, inv).is_some() {
            return Err(StoreError::DuplicateRelation(r));
        }
    }
    let mut pairs: BTreeMap<RelationId, RelationId> = BTreeMap::new();
    for (&r, &inv) in &partner {
        if let Some(s) = inv {
            if s == r {
                return Err(StoreError::Config(format!("relation {r} is its own inverse")));
            }
            for (a, b) in [(r, s), (s, r)] {
                if let Some(&existing) = pairs.get(&a) {
                    if existing != b {
                        return Err(StoreError::Config(format!(
                            "relation {a} declared inverse of both {existing} and {b}"
                        )));
                    }
                }
                pairs.insert(a, b);
            }
        }
    }
    let mut ids: Vec<RelationId> = partner.keys().copied().chain(pairs.keys().copied()).collect();
    ids.sort();
    ids.dedup();

    let mut out = BTreeMap::new();
    let mut next = 0;
    for r in ids {
        let slot = match pairs.get(&r).and_then(|p| out.get(p)) {
            Some(&TransitiveSlot { dim, .. }) => TransitiveSlot { dim, inverse: true },
            None => {
                next += 1;
                TransitiveSlot { dim: next - 1, inverse: false }
            }
        };
        out.insert(r, slot);
    }
    if next > dim {
        return Err(StoreError::Capacity { needed: next, dim });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    num_entities: usize,
    entity_centers: Vec<f64>,
    entity_offsets_raw: Vec<f64>,
    answer_centers: Option<Vec<f64>>,
    /// Row-major `[relation][component][coordinate]`.
    relation_params: Vec<f64>,
    relations: Vec<RelationMeta>,
    transitive: BTreeMap<RelationId, TransitiveSlot>,
    projection_mode: ProjectionMode,
    gamma: f64,
    seed: u64,
    scoring: ScoringConfig,
}

/// Parameter block names in optimizer order.
pub const BLOCK_NAMES: [&str; 4] = ["entity_centers", "entity_offsets", "answer_centers", "relations"];

impl EmbeddingStore {
    pub fn init(num_entities: usize, relations: &[RelationMeta], config: &StoreConfig, seed: u64) -> Result<Self> {
        let dim = config.dim;
        if num_entities == 0 || relations.is_empty() || dim == 0 {
            return Err(StoreError::Config("entity count, relation count and dim must be positive".into()));
        }
        if !(config.gamma > 0.0) {
            return Err(StoreError::Config("gamma must be positive".into()));
        }
        for m in relations {
            if let Some(p) = m.inverse_of {
                if p.index() >= relations.len() {
                    return Err(StoreError::UnknownId { kind: "relation", id: p.0 });
                }
            }
        }
        // inverse links only count when both sides are transitive
        let declared: Vec<(RelationId, Option<RelationId>)> = relations
            .iter()
            .enumerate()
            .filter(|(_, m)| m.transitive)
            .map(|(k, m)| (RelationId(k as u32), m.inverse_of.filter(|p| relations[p.index()].transitive)))
            .collect();
        if !declared.is_empty() && dim < 2 {
            return Err(StoreError::Capacity { needed: 2, dim });
        }
        let transitive = assign_transitive_dims(&declared, dim)?;

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let range = config.gamma / (dim as f64).sqrt();
        let uniform = |n: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..n).map(|_| rng.gen_range(lo..hi)).collect()
        };
        let entity_centers = uniform(num_entities * dim, -range, range, &mut rng);
        let entity_offsets_raw = uniform(num_entities * dim, -range, range, &mut rng);
        let answer_centers =
            config.answer_embedding.then(|| uniform(num_entities * dim, -range, range, &mut rng));
        let mut relation_params = Vec::with_capacity(relations.len() * 4 * dim);
        for _ in relations {
            relation_params.extend(uniform(dim, 0.9, 1.1, &mut rng));
            relation_params.extend(uniform(dim, -0.1, 0.1, &mut rng));
            relation_params.extend(uniform(dim, 0.9, 1.1, &mut rng));
            relation_params.extend(uniform(dim, -0.1, 0.1, &mut rng));
        }
        Ok(Self {
            dim,
            num_entities,
            entity_centers,
            entity_offsets_raw,
            answer_centers,
            relation_params,
            relations: relations.to_vec(),
            transitive,
            projection_mode: config.projection_mode,
            gamma: config.gamma,
            seed,
            scoring: config.scoring,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_entities(&self) -> usize {
        self.num_entities
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn relation_meta(&self) -> &[RelationMeta] {
        &self.relations
    }

    pub fn projection_mode(&self) -> ProjectionMode {
        self.projection_mode
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn tied_answers(&self) -> bool {
        self.answer_centers.is_none()
    }

    pub fn scoring(&self) -> ScoringConfig {
        self.scoring
    }

    pub fn set_scoring(&mut self, scoring: ScoringConfig) {
        self.scoring = scoring;
    }

    pub fn transitive_dims(&self) -> &BTreeMap<RelationId, TransitiveSlot> {
        &self.transitive
    }

    pub fn transitive_slot(&self, r: RelationId) -> Option<TransitiveSlot> {
        self.transitive.get(&r).copied()
    }

    fn row(&self, e: EntityId) -> std::ops::Range<usize> {
        e.index() * self.dim..(e.index() + 1) * self.dim
    }

    pub fn entity_center(&self, e: EntityId) -> &[f64] {
        &self.entity_centers[self.row(e)]
    }

    pub fn entity_center_mut(&mut self, e: EntityId) -> &mut [f64] {
        let row = self.row(e);
        &mut self.entity_centers[row]
    }

    pub fn entity_offset_raw(&self, e: EntityId) -> &[f64] {
        &self.entity_offsets_raw[self.row(e)]
    }

    /// Query box of an entity, offsets read through `abs`.
    pub fn entity_box(&self, e: EntityId) -> Option<BoxEmbedding> {
        if e.index() >= self.num_entities {
            return None;
        }
        let offset = self.entity_offset_raw(e).iter().map(|o| o.abs()).collect();
        Some(BoxEmbedding::new(self.entity_center(e).to_vec(), offset).expect("abs offsets are valid"))
    }

    /// Answer point of an entity.
    pub fn answer(&self, e: EntityId) -> &[f64] {
        let row = self.row(e);
        match &self.answer_centers {
            Some(a) => &a[row],
            None => &self.entity_centers[row],
        }
    }

    pub fn answer_mut(&mut self, e: EntityId) -> &mut [f64] {
        let row = self.row(e);
        match &mut self.answer_centers {
            Some(a) => &mut a[row],
            None => &mut self.entity_centers[row],
        }
    }

    /// Raw stored component `k` (0..4) of relation `r`, ignoring the mode mask.
    pub fn relation_raw(&self, r: RelationId, k: usize) -> &[f64] {
        let start = (r.index() * 4 + k) * self.dim;
        &self.relation_params[start..start + self.dim]
    }

    pub fn relation_raw_mut(&mut self, r: RelationId, k: usize) -> &mut [f64] {
        let start = (r.index() * 4 + k) * self.dim;
        &mut self.relation_params[start..start + self.dim]
    }

    /// Effective component `k` of relation `r` coordinate `i` after masking.
    #[inline]
    pub fn relation_component(&self, r: RelationId, k: usize, i: usize) -> f64 {
        match (self.projection_mode, k) {
            (ProjectionMode::Additive, 0 | 2) => 1.0,
            (ProjectionMode::Multiplicative, 1 | 3) => 0.0,
            _ => self.relation_params[(r.index() * 4 + k) * self.dim + i],
        }
    }

    /// Effective relation embedding with transitive metadata.
    pub fn relation(&self, r: RelationId) -> Option<RelationEmbedding> {
        let meta = self.relations.get(r.index())?;
        let comp = |k: usize| (0..self.dim).map(|i| self.relation_component(r, k, i)).collect::<Vec<_>>();
        Some(RelationEmbedding {
            r1: comp(0),
            r2: comp(1),
            r3: comp(2),
            r4: comp(3),
            transitive: self.transitive_slot(r),
            inverse_of: meta.inverse_of,
        })
    }

    /// Mutable parameter blocks in [`BLOCK_NAMES`] order; the answer block is
    /// empty in tied mode.
    pub fn blocks_mut(&mut self) -> [&mut [f64]; 4] {
        let answers: &mut [f64] = match &mut self.answer_centers {
            Some(a) => a.as_mut_slice(),
            None => &mut [],
        };
        [&mut self.entity_centers, &mut self.entity_offsets_raw, answers, &mut self.relation_params]
    }

    pub fn blocks(&self) -> [&[f64]; 4] {
        [
            &self.entity_centers,
            &self.entity_offsets_raw,
            self.answer_centers.as_deref().unwrap_or(&[]),
            &self.relation_params,
        ]
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let header = Header {
            format_version: FORMAT_VERSION,
            dim: self.dim,
            num_entities: self.num_entities,
            num_relations: self.relations.len(),
            projection_mode: self.projection_mode,
            answer_embedding: self.answer_centers.is_some(),
            gamma: self.gamma,
            seed: self.seed,
            scoring: self.scoring,
            relations: self.relations.clone(),
            transitive: self.transitive.iter().map(|(&r, &s)| (r, s)).collect(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| StoreError::Checkpoint(e.to_string()))?;
        let mut buf = Vec::with_capacity(24 + json.len() + 8 * self.blocks().iter().map(|b| b.len()).sum::<usize>());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
        buf.extend_from_slice(&json);
        for block in self.blocks() {
            for x in block {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)?;
            }
        }
        let mut f = fs::File::create(path)?;
        f.write_all(&buf)?;
        Ok(())
    }

    pub fn load_checkpoint(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        Self::from_checkpoint_bytes(&bytes)
    }

    /// Loads a checkpoint and rejects it if its answer mode differs from `answer_embedding`.
    pub fn load_checkpoint_expecting(path: &Path, answer_embedding: bool) -> Result<Self> {
        let store = Self::load_checkpoint(path)?;
        if store.answer_centers.is_some() != answer_embedding {
            return Err(StoreError::ConfigMismatch(format!(
                "checkpoint has answer_embedding={} but config requests {}",
                store.answer_centers.is_some(),
                answer_embedding
            )));
        }
        Ok(store)
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Self> {
        let truncated = || StoreError::Checkpoint("truncated file".into());
        if bytes.len() < 20 {
            return Err(truncated());
        }
        if &bytes[..8] != MAGIC {
            return Err(StoreError::Checkpoint("bad magic bytes".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(StoreError::Checkpoint(format!("unsupported format version {version}")));
        }
        let header_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let body = bytes.get(20..20usize.checked_add(header_len).ok_or_else(truncated)?).ok_or_else(truncated)?;
        let header: Header =
            serde_json::from_slice(body).map_err(|e| StoreError::Checkpoint(format!("bad header: {e}")))?;
        if header.format_version != FORMAT_VERSION {
            return Err(StoreError::Checkpoint(format!(
                "unsupported format version {}",
                header.format_version
            )));
        }
        if header.relations.len() != header.num_relations {
            return Err(StoreError::Checkpoint("relation vocabulary size mismatch".into()));
        }
        let mut data = &bytes[20 + header_len..];
        let ent = header.num_entities * header.dim;
        let mut take = |n: usize| -> Result<Vec<f64>> {
            if data.len() < n * 8 {
                return Err(truncated());
            }
            let (head, rest) = data.split_at(n * 8);
            data = rest;
            Ok(head.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
        };
        let entity_centers = take(ent)?;
        let entity_offsets_raw = take(ent)?;
        let answer_centers = if header.answer_embedding { Some(take(ent)?) } else { None };
        let relation_params = take(header.num_relations * 4 * header.dim)?;
        if !data.is_empty() {
            return Err(StoreError::Checkpoint(format!("{} trailing bytes", data.len())));
        }
        Ok(Self {
            dim: header.dim,
            num_entities: header.num_entities,
            entity_centers,
            entity_offsets_raw,
            answer_centers,
            relation_params,
            relations: header.relations,
            transitive: header.transitive.into_iter().collect(),
            projection_mode: header.projection_mode,
            gamma: header.gamma,
            seed: header.seed,
            scoring: header.scoring,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    dim: usize,
    num_entities: usize,
    num_relations: usize,
    projection_mode: ProjectionMode,
    answer_embedding: bool,
    gamma: f64,
    seed: u64,
    scoring: ScoringConfig,
    relations: Vec<RelationMeta>,
    transitive: Vec<(RelationId, TransitiveSlot)>,
}
