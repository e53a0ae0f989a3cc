//! The state space: probability vectors in `S^{m-1}`.
//!
//! `S^{m-1} = { x ∈ R^m : x_i ≥ 0, Σ x_i = 1 }`. Points are immutable
//! values; all operator applications renormalize through the same
//! [`normalize_in_place`] path so the sum invariant survives arbitrarily
//! long runs.

use serde::Serialize;
use thiserror::Error;

/// Post-construction tolerance on `|Σ x_i − 1|`.
pub const SUM_TOLERANCE: f64 = 1e-12;
/// Coordinates in `[−NEG_TOLERANCE, 0)` are clamped to 0; below is an error.
pub const NEG_TOLERANCE: f64 = 1e-12;
/// Accepted deviation of the input sum from 1 before rejection.
pub const INPUT_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimplexError {
    #[error("a simplex point needs at least 2 coordinates, got {0}")]
    TooFewCoordinates(usize),
    #[error("coordinate {index} is {value:e}, below the clamp tolerance -1e-12")]
    NegativeCoordinate { index: usize, value: f64 },
    #[error("coordinate {index} is not finite")]
    NonFinite { index: usize },
    #[error("coordinate sum {sum} differs from 1 by more than 1e-6")]
    SumOutOfRange { sum: f64 },
    #[error("vertex index {index} out of range for dimension {m}")]
    VertexOutOfRange { index: usize, m: usize },
    #[error("neighborhood radius must be positive and finite, got {0}")]
    BadRadius(f64),
}

/// A point of the probability simplex `S^{m-1}`.
///
/// Invariants: every coordinate is nonnegative, the coordinates sum to 1
/// within [`SUM_TOLERANCE`], and `m = coords.len() ≥ 2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct SimplexPoint {
    coords: Vec<f64>,
}

/// Clamp slightly negative coordinates to zero and divide by the sum.
///
/// Shared by [`SimplexPoint::validate`] and the operator-application hot
/// path. Exact inputs pass through unchanged: dividing by a sum of exactly
/// 1.0 is a bitwise no-op.
pub(crate) fn normalize_in_place(coords: &mut [f64]) -> Result<(), SimplexError> {
    if coords.len() < 2 {
        return Err(SimplexError::TooFewCoordinates(coords.len()));
    }
    for (index, value) in coords.iter_mut().enumerate() {
        if !value.is_finite() {
            return Err(SimplexError::NonFinite { index });
        }
        if *value < 0.0 {
            if *value < -NEG_TOLERANCE {
                return Err(SimplexError::NegativeCoordinate {
                    index,
                    value: *value,
                });
            }
            *value = 0.0;
        }
    }
    let sum: f64 = coords.iter().sum();
    if (sum - 1.0).abs() > INPUT_SUM_TOLERANCE {
        return Err(SimplexError::SumOutOfRange { sum });
    }
    for value in coords.iter_mut() {
        *value /= sum;
    }
    Ok(())
}

impl SimplexPoint {
    /// Validate a raw coordinate vector into a simplex point.
    ///
    /// Coordinates in `[−1e-12, 0)` are clamped to zero and the vector is
    /// renormalized by its sum; anything more negative, a sum further than
    /// 1e-6 from 1, or fewer than two entries is rejected.
    pub fn validate(coords: &[f64]) -> Result<Self, SimplexError> {
        let mut owned = coords.to_vec();
        normalize_in_place(&mut owned)?;
        Ok(Self { coords: owned })
    }

    /// Wrap coordinates already known to satisfy the invariants.
    pub(crate) fn from_normalized(coords: Vec<f64>) -> Self {
        debug_assert!(coords.len() >= 2);
        debug_assert!(coords.iter().all(|&v| v >= 0.0));
        debug_assert!((coords.iter().sum::<f64>() - 1.0).abs() <= SUM_TOLERANCE);
        Self { coords }
    }

    /// The barycenter `(1/m, ..., 1/m)`.
    pub fn barycenter(m: usize) -> Result<Self, SimplexError> {
        if m < 2 {
            return Err(SimplexError::TooFewCoordinates(m));
        }
        Ok(Self {
            coords: vec![1.0 / m as f64; m],
        })
    }

    /// The vertex `e_i` (0-based index).
    pub fn vertex(m: usize, i: usize) -> Result<Self, SimplexError> {
        if m < 2 {
            return Err(SimplexError::TooFewCoordinates(m));
        }
        if i >= m {
            return Err(SimplexError::VertexOutOfRange { index: i, m });
        }
        let mut coords = vec![0.0; m];
        coords[i] = 1.0;
        Ok(Self { coords })
    }

    pub fn m(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn get(&self, i: usize) -> f64 {
        self.coords[i]
    }

    /// Euclidean distance `‖x − e_i‖` to the vertex with 0-based index `i`.
    pub fn vertex_distance(&self, i: usize) -> Result<f64, SimplexError> {
        if i >= self.m() {
            return Err(SimplexError::VertexOutOfRange {
                index: i,
                m: self.m(),
            });
        }
        Ok(vertex_distance_raw(&self.coords, i))
    }

    /// Membership in the union of vertex ε-neighborhoods `U_ε`.
    ///
    /// Returns the smallest 0-based `j` with `x_i < ε` for every `i ≠ j`
    /// (strict inequalities), or `None` when the point is in no
    /// neighborhood. Radii `ε ≥ 1` are allowed and always yield a match;
    /// `ε ≤ 0` is rejected.
    pub fn in_neighborhood(&self, eps: f64) -> Result<Option<usize>, SimplexError> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(SimplexError::BadRadius(eps));
        }
        Ok(in_neighborhood_raw(&self.coords, eps))
    }

    /// Index of the largest coordinate, smallest index winning ties.
    pub fn argmax(&self) -> usize {
        argmax_raw(&self.coords)
    }

    pub fn min_coord(&self) -> f64 {
        self.coords.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_coord(&self) -> f64 {
        self.coords.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `(argmin over vertices, distance)` to the vertex set Λ.
    pub fn nearest_vertex(&self) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for i in 0..self.m() {
            let d = vertex_distance_raw(&self.coords, i);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    pub fn is_interior(&self) -> bool {
        self.coords.iter().all(|&v| v > 0.0)
    }
}

pub(crate) fn vertex_distance_raw(coords: &[f64], i: usize) -> f64 {
    let mut acc = 0.0;
    for (j, &v) in coords.iter().enumerate() {
        let d = if j == i { v - 1.0 } else { v };
        acc += d * d;
    }
    acc.sqrt()
}

pub(crate) fn in_neighborhood_raw(coords: &[f64], eps: f64) -> Option<usize> {
    'candidates: for j in 0..coords.len() {
        for (i, &v) in coords.iter().enumerate() {
            if i != j && v >= eps {
                continue 'candidates;
            }
        }
        return Some(j);
    }
    None
}

pub(crate) fn argmax_raw(coords: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in coords.iter().enumerate().skip(1) {
        if v > coords[best] {
            best = i;
        }
    }
    best
}

/// The vertex set `Λ = {e_1, ..., e_m}`.
#[derive(Debug, Clone, Copy)]
pub struct VertexSet {
    m: usize,
}

impl VertexSet {
    pub fn new(m: usize) -> Result<Self, SimplexError> {
        if m < 2 {
            return Err(SimplexError::TooFewCoordinates(m));
        }
        Ok(Self { m })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize) -> Result<SimplexPoint, SimplexError> {
        SimplexPoint::vertex(self.m, i)
    }

    pub fn iter(&self) -> impl Iterator<Item = SimplexPoint> + '_ {
        (0..self.m).map(move |i| SimplexPoint::vertex(self.m, i).expect("valid vertex"))
    }

    /// Euclidean distance from `x` to the set Λ.
    pub fn distance(&self, x: &SimplexPoint) -> f64 {
        x.nearest_vertex().1
    }
}

/// All lattice points of `S^{m-1}` with coordinates that are multiples of
/// `1/degree`, in lexicographic order. Contains every vertex; for `m = 3`,
/// `degree = 4` this is the 15-point refinement grid used by the block-wise
/// success estimator.
pub fn simplex_lattice(m: usize, degree: usize) -> Result<Vec<SimplexPoint>, SimplexError> {
    if m < 2 {
        return Err(SimplexError::TooFewCoordinates(m));
    }
    assert!(degree >= 1, "lattice degree must be at least 1");
    let mut out = Vec::new();
    let mut partial = vec![0usize; m];
    fill_compositions(m, degree, 0, degree, &mut partial, &mut out);
    Ok(out)
}

fn fill_compositions(
    m: usize,
    degree: usize,
    pos: usize,
    remaining: usize,
    partial: &mut [usize],
    out: &mut Vec<SimplexPoint>,
) {
    if pos == m - 1 {
        partial[pos] = remaining;
        let coords: Vec<f64> = partial.iter().map(|&c| c as f64 / degree as f64).collect();
        out.push(SimplexPoint::from_normalized(coords));
        return;
    }
    for c in (0..=remaining).rev() {
        partial[pos] = c;
        fill_compositions(m, degree, pos + 1, remaining - c, partial, out);
    }
}
