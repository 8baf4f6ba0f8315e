//! Parameter-free box calculus.
//!
//! A box is stored as `(center, offset)` with `lower = center - offset` and
//! `upper = center + offset`. Answers are points, i.e. zero-volume boxes.
//! Intersections that invert a corner pair produce an [`EmptyBox`], which keeps
//! the inverted corners so every point stays at a strictly positive outside
//! distance from it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::GeometryError;
use crate::ids::RelationId;

type Result<T> = std::result::Result<T, GeometryError>;

/// Default tolerance for [`classify_idempotency`].
pub const DEFAULT_IDEMPOTENCY_TOL: f64 = 1e-6;

/// Read access to the corners of anything box-shaped.
pub trait Corners {
    fn dim(&self) -> usize;
    fn center_at(&self, i: usize) -> f64;
    /// Half-width; negative in the inverted dimensions of an [`EmptyBox`].
    fn offset_at(&self, i: usize) -> f64;

    #[inline]
    fn lower_at(&self, i: usize) -> f64 {
        self.center_at(i) - self.offset_at(i)
    }

    #[inline]
    fn upper_at(&self, i: usize) -> f64 {
        self.center_at(i) + self.offset_at(i)
    }

    fn lower(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.lower_at(i)).collect()
    }

    fn upper(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.upper_at(i)).collect()
    }
}

/// An axis-aligned box with non-negative offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxEmbedding {
    center: Vec<f64>,
    offset: Vec<f64>,
}

impl BoxEmbedding {
    pub fn new(center: Vec<f64>, offset: Vec<f64>) -> Result<Self> {
        check_dim(center.len(), offset.len())?;
        if let Some((dim, &o)) = offset.iter().enumerate().find(|(_, o)| !(**o >= 0.0)) {
            return Err(GeometryError::InvalidParameter(format!(
                "offset[{dim}] = {o} must be non-negative"
            )));
        }
        Ok(Self { center, offset })
    }

    /// Builds the box spanned by `lower` and `upper`.
    pub fn from_corners(lower: &[f64], upper: &[f64]) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        let mut center = Vec::with_capacity(lower.len());
        let mut offset = Vec::with_capacity(lower.len());
        for (dim, (&lo, &hi)) in lower.iter().zip(upper).enumerate() {
            if !(lo <= hi) {
                return Err(GeometryError::CornerOrder { dim, lower: lo, upper: hi });
            }
            center.push((hi + lo) / 2.0);
            offset.push((hi - lo) / 2.0);
        }
        Ok(Self { center, offset })
    }

    /// Zero-volume box at `p`.
    pub fn point(p: &[f64]) -> Self {
        Self { center: p.to_vec(), offset: vec![0.0; p.len()] }
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<f64>) {
        (self.center, self.offset)
    }

    pub fn is_zero_volume(&self) -> bool {
        self.offset.iter().all(|&o| o == 0.0)
    }

    /// True when `p` lies inside or on the boundary.
    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter().enumerate().all(|(i, &x)| self.lower_at(i) <= x && x <= self.upper_at(i))
    }

    /// Drops coordinate `index` from both center and offset.
    pub fn without_dim(&self, index: usize) -> Self {
        Self { center: remove_at(&self.center, index), offset: remove_at(&self.offset, index) }
    }
}

impl Corners for BoxEmbedding {
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

/// Result of an intersection whose lower corner exceeds its upper corner in
/// at least one dimension.
///
/// The canonical form is a zero-volume box at the midpoint of the inverted
/// corners; distances use the recorded corners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmptyBox {
    center: Vec<f64>,
    signed_offset: Vec<f64>,
}

impl EmptyBox {
    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn signed_offset(&self) -> &[f64] {
        &self.signed_offset
    }

    pub fn canonical(&self) -> BoxEmbedding {
        BoxEmbedding::point(&self.center)
    }
}

impl Corners for EmptyBox {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn center_at(&self, i: usize) -> f64 {
        self.center[i]
    }
    fn offset_at(&self, i: usize) -> f64 {
        self.signed_offset[i]
    }
}

/// A query region: either a proper box or an empty intersection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Region {
    Box(BoxEmbedding),
    Empty(EmptyBox),
}

impl Region {
    pub fn is_empty(&self) -> bool {
        matches!(self, Region::Empty(_))
    }

    /// The box used when this region feeds another operator.
    pub fn as_box(&self) -> BoxEmbedding {
        match self {
            Region::Box(b) => b.clone(),
            Region::Empty(e) => e.canonical(),
        }
    }

    pub fn center(&self) -> &[f64] {
        match self {
            Region::Box(b) => b.center(),
            Region::Empty(e) => e.center(),
        }
    }
}

impl From<BoxEmbedding> for Region {
    fn from(b: BoxEmbedding) -> Self {
        Region::Box(b)
    }
}

impl Corners for Region {
    fn dim(&self) -> usize {
        match self {
            Region::Box(b) => b.dim(),
            Region::Empty(e) => e.dim(),
        }
    }
    fn center_at(&self, i: usize) -> f64 {
        match self {
            Region::Box(b) => b.center_at(i),
            Region::Empty(e) => e.center_at(i),
        }
    }
    fn offset_at(&self, i: usize) -> f64 {
        match self {
            Region::Box(b) => b.offset_at(i),
            Region::Empty(e) => e.offset_at(i),
        }
    }
}

/// Coordinate reserved for a transitive relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitiveSlot {
    pub dim: usize,
    /// Use the inverse ordering (`a[i] >= q[i] + lambda`).
    pub inverse: bool,
}

/// The 4-tuple `(r1, r2, r3, r4)` defining
/// `T_r(B) = (r1 * center + r2, |r3 * offset + r4|)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationEmbedding {
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
    pub r3: Vec<f64>,
    pub r4: Vec<f64>,
    pub transitive: Option<TransitiveSlot>,
    pub inverse_of: Option<RelationId>,
}

impl RelationEmbedding {
    pub fn new(r1: Vec<f64>, r2: Vec<f64>, r3: Vec<f64>, r4: Vec<f64>) -> Result<Self> {
        let n = r1.len();
        for v in [&r2, &r3, &r4] {
            check_dim(n, v.len())?;
        }
        Ok(Self { r1, r2, r3, r4, transitive: None, inverse_of: None })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            r1: vec![1.0; dim],
            r2: vec![0.0; dim],
            r3: vec![1.0; dim],
            r4: vec![0.0; dim],
            transitive: None,
            inverse_of: None,
        }
    }

    pub fn with_transitive(mut self, slot: TransitiveSlot) -> Self {
        self.transitive = Some(slot);
        self
    }

    pub fn dim(&self) -> usize {
        self.r1.len()
    }
}

/// Applies the relation transformation to a box.
pub fn project(b: &BoxEmbedding, r: &RelationEmbedding) -> Result<BoxEmbedding> {
    check_dim(r.dim(), b.dim())?;
    let center = (0..b.dim()).map(|i| r.r1[i] * b.center[i] + r.r2[i]).collect();
    let offset = (0..b.dim()).map(|i| (r.r3[i] * b.offset[i] + r.r4[i]).abs()).collect();
    Ok(BoxEmbedding { center, offset })
}

/// Projects a region; empty regions are projected through their canonical form.
pub fn project_region(q: &Region, r: &RelationEmbedding) -> Result<BoxEmbedding> {
    match q {
        Region::Box(b) => project(b, r),
        Region::Empty(e) => project(&e.canonical(), r),
    }
}

/// Coordinate-wise max of lower corners and min of upper corners.
///
/// In a dimension where one input supplies both the max lower and the min
/// upper corner, that input's center and offset are copied unchanged.
pub fn intersect<C: Corners>(boxes: &[C]) -> Result<Region> {
    let first = boxes.first().ok_or(GeometryError::EmptyInput)?;
    let n = first.dim();
    for b in boxes {
        check_dim(n, b.dim())?;
    }
    let mut center = Vec::with_capacity(n);
    let mut offset = Vec::with_capacity(n);
    let mut empty = false;
    for i in 0..n {
        let (lo_arg, lo) = arg_best(boxes, |b| b.lower_at(i), |x, best| x > best);
        let (hi_arg, hi) = arg_best(boxes, |b| b.upper_at(i), |x, best| x < best);
        if lo_arg == hi_arg {
            center.push(boxes[lo_arg].center_at(i));
            offset.push(boxes[lo_arg].offset_at(i));
        } else {
            center.push((lo + hi) / 2.0);
            offset.push((hi - lo) / 2.0);
        }
        if lo > hi {
            empty = true;
        }
    }
    Ok(if empty {
        Region::Empty(EmptyBox { center, signed_offset: offset })
    } else {
        Region::Box(BoxEmbedding { center, offset })
    })
}

/// Index and value of the first element winning under `better`.
pub(crate) fn arg_best<C>(
    items: &[C],
    value: impl Fn(&C) -> f64,
    better: impl Fn(f64, f64) -> bool,
) -> (usize, f64) {
    let mut best_arg = 0;
    let mut best = value(&items[0]);
    for (k, item) in items.iter().enumerate().skip(1) {
        let x = value(item);
        if better(x, best) {
            best_arg = k;
            best = x;
        }
    }
    (best_arg, best)
}

/// Per-dimension outside violation `max(a - upper, 0) + max(lower - a, 0)`.
#[inline]
pub(crate) fn out_term(lower: f64, upper: f64, a: f64) -> f64 {
    (a - upper).max(0.0) + (lower - a).max(0.0)
}

/// Per-dimension inside distance `|center - min(upper, max(lower, a))|`.
#[inline]
pub(crate) fn in_term(center: f64, lower: f64, upper: f64, a: f64) -> f64 {
    let m = if lower >= a { lower } else { a };
    let clamp = if upper <= m { upper } else { m };
    (center - clamp).abs()
}

/// Ordering penalty on a transitive coordinate.
///
/// Forward form: `max(a - q + lambda, 0)`; inverse form: `max(q - a + lambda, 0)`.
#[inline]
pub fn dist_ordering(q_i: f64, a_i: f64, lambda: f64, inverse: bool) -> f64 {
    if inverse {
        (q_i - a_i + lambda).max(0.0)
    } else {
        (a_i - q_i + lambda).max(0.0)
    }
}

/// L1 norm of the violation of `a` lying inside `q`.
pub fn dist_out<C: Corners>(q: &C, a: &[f64]) -> Result<f64> {
    check_dim(q.dim(), a.len())?;
    Ok((0..a.len()).map(|i| out_term(q.lower_at(i), q.upper_at(i), a[i])).sum())
}

/// L1 distance from the center of `q` to `a` clamped into `q`.
pub fn dist_in<C: Corners>(q: &C, a: &[f64]) -> Result<f64> {
    check_dim(q.dim(), a.len())?;
    Ok((0..a.len())
        .map(|i| in_term(q.center_at(i), q.lower_at(i), q.upper_at(i), a[i]))
        .sum())
}

/// `dist_out + alpha * dist_in`.
pub fn dist_box<C: Corners>(q: &C, a: &[f64], alpha: f64) -> Result<f64> {
    Ok(dist_out(q, a)? + alpha * dist_in(q, a)?)
}

/// Box distance on every coordinate except `index`, plus the ordering
/// penalty on coordinate `index`.
pub fn dist_box_tr<C: Corners>(
    q: &C,
    a: &[f64],
    index: usize,
    alpha: f64,
    lambda: f64,
    inverse: bool,
) -> Result<f64> {
    check_dim(q.dim(), a.len())?;
    let n = a.len();
    if n < 2 || index >= n {
        return Err(GeometryError::DimensionOutOfRange { index, dim: n });
    }
    let mut out = 0.0;
    let mut inside = 0.0;
    for i in (0..n).filter(|&i| i != index) {
        let (lo, hi) = (q.lower_at(i), q.upper_at(i));
        out += out_term(lo, hi, a[i]);
        inside += in_term(q.center_at(i), lo, hi, a[i]);
    }
    Ok(out + alpha * inside + dist_ordering(q.center_at(index), a[index], lambda, inverse))
}

/// Idempotency class of a relation transformation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Idempotency {
    Identity,
    Constant,
    NotIdempotent,
}

pub fn classify_idempotency(r: &RelationEmbedding, tol: f64) -> Idempotency {
    let near = |v: &[f64], target: f64| v.iter().all(|&x| (x - target).abs() <= tol);
    if near(&r.r1, 1.0) && near(&r.r2, 0.0) && near(&r.r3, 1.0) && near(&r.r4, 0.0) {
        Idempotency::Identity
    } else if near(&r.r1, 0.0) && near(&r.r3, 0.0) && r.r4.iter().all(|&x| x >= -tol) {
        Idempotency::Constant
    } else {
        Idempotency::NotIdempotent
    }
}

/// `(min(1, 2 sigma / L))^n`.
pub fn overlap_probability_closed_form(length: f64, sigma: f64, n: u32) -> Result<f64> {
    check_overlap_params(length, sigma, n)?;
    Ok((2.0 * sigma / length).min(1.0).powi(n as i32))
}

/// Exact overlap probability when both centers are independent and uniform on
/// `[0, L]^n` with offsets `sigma`: per dimension
/// `P(|c1 - c2| <= 2 sigma) = 1 - (1 - min(1, 2 sigma / L))^2`.
pub fn uniform_pair_overlap_probability(length: f64, sigma: f64, n: u32) -> Result<f64> {
    check_overlap_params(length, sigma, n)?;
    let p = (2.0 * sigma / length).min(1.0);
    Ok((1.0 - (1.0 - p) * (1.0 - p)).powi(n as i32))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

/// Monte-Carlo overlap frequency of box pairs with centers uniform on
/// `[0, L]^n` and constant offsets `sigma`.
pub fn estimate_overlap_probability(
    length: f64,
    sigma: f64,
    n: u32,
    samples: u64,
    seed: u64,
) -> Result<OverlapEstimate> {
    check_overlap_params(length, sigma, n)?;
    if samples == 0 {
        return Err(GeometryError::InvalidParameter("samples must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reach = 2.0 * sigma;
    let mut hits = 0u64;
    for _ in 0..samples {
        let mut overlap = true;
        // every coordinate is drawn so the stream position depends only on n
        for _ in 0..n {
            let c1: f64 = rng.gen::<f64>() * length;
            let c2: f64 = rng.gen::<f64>() * length;
            overlap &= (c1 - c2).abs() <= reach;
        }
        hits += overlap as u64;
    }
    let estimate = hits as f64 / samples as f64;
    let std_error = (estimate * (1.0 - estimate) / samples as f64).sqrt();
    Ok(OverlapEstimate { estimate, std_error })
}

/// Number of points sampled uniformly from `b2` that fall inside `b1`.
///
/// Requires `b1` and `b2` to be disjoint.
pub fn complement_intersection_violations(
    b1: &BoxEmbedding,
    b2: &BoxEmbedding,
    samples: u64,
    seed: u64,
) -> Result<u64> {
    if !intersect(&[b1.clone(), b2.clone()])?.is_empty() {
        return Err(GeometryError::BoxesOverlap);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = vec![0.0; b2.dim()];
    let mut violations = 0;
    for _ in 0..samples {
        for (i, x) in p.iter_mut().enumerate() {
            let (lo, hi) = (b2.lower_at(i), b2.upper_at(i));
            *x = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
        }
        if b1.contains(&p) {
            violations += 1;
        }
    }
    Ok(violations)
}

/// True when every sampled point of `b2` lies in the complement of `b1`.
pub fn complement_intersection_check(
    b1: &BoxEmbedding,
    b2: &BoxEmbedding,
    samples: u64,
    seed: u64,
) -> Result<bool> {
    Ok(complement_intersection_violations(b1, b2, samples, seed)? == 0)
}

fn check_overlap_params(length: f64, sigma: f64, n: u32) -> Result<()> {
    if !(length > 0.0) || !(sigma > 0.0) || n == 0 {
        return Err(GeometryError::InvalidParameter(format!(
            "need L > 0, sigma > 0, n >= 1 (got L={length}, sigma={sigma}, n={n})"
        )));
    }
    Ok(())
}

#[inline]
fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(GeometryError::DimensionMismatch { expected, found })
    }
}

pub(crate) fn remove_at(v: &[f64], index: usize) -> Vec<f64> {
    v.iter().enumerate().filter(|&(i, _)| i != index).map(|(_, &x)| x).collect()
}
