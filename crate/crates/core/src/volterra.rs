//! Volterra quadratic stochastic operators.
//!
//! A QSO acts by `x'_k = Σ_{i,j} p_{ij,k} x_i x_j` with symmetric,
//! row-stochastic heredity coefficients. The Volterra subclass keeps
//! `p_{ij,k} = 0` for `k ∉ {i, j}` and is equivalent to
//!
//! ```text
//! (Vx)_k = x_k (1 + Σ_i a_ki x_i),      a_ki = 2 p_{ik,k} − 1,
//! ```
//!
//! with `A` skew-symmetric and entries in `[−1, 1]`. The matrix form is the
//! canonical O(m²) application path; the coefficient tensor is kept as the
//! O(m³) reference evaluator for cross-checking.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simplex::{normalize_in_place, SimplexError, SimplexPoint};

/// Tolerance for skew-symmetry, the Volterra zero pattern, and tensor
/// stochasticity checks.
pub const STRUCT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VolterraError {
    #[error("matrix must be {m}x{m}, row {row} has {len} entries")]
    BadShape { m: usize, row: usize, len: usize },
    #[error("dimension must be at least 2, got {0}")]
    BadDimension(usize),
    #[error("entry a[{i}][{j}] = {value} breaks skew-symmetry beyond tolerance")]
    NotSkewSymmetric { i: usize, j: usize, value: f64 },
    #[error("entry a[{i}][{j}] = {value} outside [-1, 1]")]
    EntryOutOfRange { i: usize, j: usize, value: f64 },
    #[error("operator dimension {op} does not match point dimension {point}")]
    DimensionMismatch { op: usize, point: usize },
    #[error("index {index} out of range for dimension {m}")]
    IndexOutOfRange { index: usize, m: usize },
    #[error("{pairs} sign pairs exceed the enumeration guard of 30 (m = {m})")]
    EnumerationTooLarge { m: usize, pairs: usize },
    #[error("not a Volterra operator: p[{i}][{j}][{k}] = {value} with k outside {{i, j}}")]
    NotVolterra {
        i: usize,
        j: usize,
        k: usize,
        value: f64,
    },
    #[error("invalid QSO tensor: {0}")]
    BadTensor(String),
    #[error("invalid operator spec `{0}`: {1}")]
    BadSpec(String, String),
    #[error(transparent)]
    Simplex(#[from] SimplexError),
}

/// A Volterra operator held as its skew-symmetric interaction matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct VolterraOperator {
    m: usize,
    /// Row-major `m × m`, exactly skew-symmetric after canonicalization.
    a: Vec<f64>,
}

impl VolterraOperator {
    /// Build from a full matrix.
    ///
    /// The upper triangle is authoritative: entries are checked against
    /// `|a_ij| ≤ 1 + 1e-12` and `|a_ij + a_ji| ≤ 1e-12`, clamped to
    /// `[−1, 1]`, and the lower triangle and diagonal are rewritten so the
    /// stored matrix is skew-symmetric to the bit.
    pub fn new(rows: &[Vec<f64>]) -> Result<Self, VolterraError> {
        let m = rows.len();
        if m < 2 {
            return Err(VolterraError::BadDimension(m));
        }
        for (row, r) in rows.iter().enumerate() {
            if r.len() != m {
                return Err(VolterraError::BadShape {
                    m,
                    row,
                    len: r.len(),
                });
            }
        }
        let mut a = vec![0.0; m * m];
        for i in 0..m {
            let d = rows[i][i];
            if !d.is_finite() || d.abs() > STRUCT_TOLERANCE {
                return Err(VolterraError::NotSkewSymmetric { i, j: i, value: d });
            }
            for j in (i + 1)..m {
                let upper = rows[i][j];
                let lower = rows[j][i];
                if !upper.is_finite() || !lower.is_finite() {
                    return Err(VolterraError::NotSkewSymmetric {
                        i,
                        j,
                        value: upper,
                    });
                }
                if (upper + lower).abs() > STRUCT_TOLERANCE {
                    return Err(VolterraError::NotSkewSymmetric {
                        i,
                        j,
                        value: lower,
                    });
                }
                if upper.abs() > 1.0 + STRUCT_TOLERANCE {
                    return Err(VolterraError::EntryOutOfRange {
                        i,
                        j,
                        value: upper,
                    });
                }
                let v = upper.clamp(-1.0, 1.0);
                a[i * m + j] = v;
                a[j * m + i] = -v;
            }
        }
        Ok(Self { m, a })
    }

    /// The identity map (`A = 0`).
    pub fn identity(m: usize) -> Result<Self, VolterraError> {
        if m < 2 {
            return Err(VolterraError::BadDimension(m));
        }
        Ok(Self {
            m,
            a: vec![0.0; m * m],
        })
    }

    /// The vertex-squaring operator `V_k`: `(V_k x)_k = x_k²` for every x.
    ///
    /// Only row/column `k` is forced (`a_ki = −1` for all `i ≠ k`); the
    /// remaining block is free and set to 0 here. Use
    /// [`VolterraOperator::squaring_over`] to choose the block.
    pub fn squaring(m: usize, k: usize) -> Result<Self, VolterraError> {
        Self::squaring_over(&Self::identity(m)?, k)
    }

    /// Overwrite row/column `k` of `base` with the squaring pattern,
    /// keeping the rest of `base` as the free block.
    pub fn squaring_over(base: &Self, k: usize) -> Result<Self, VolterraError> {
        let m = base.m;
        if k >= m {
            return Err(VolterraError::IndexOutOfRange { index: k, m });
        }
        let mut op = base.clone();
        for i in 0..m {
            if i != k {
                op.a[k * m + i] = -1.0;
                op.a[i * m + k] = 1.0;
            }
        }
        Ok(op)
    }

    /// Extremal operator addressed by a bitstring over the pairs `(i, j)`,
    /// `i < j`, in lexicographic order: character `t` is `'1'` for
    /// `a_ij = +1` and `'0'` for `a_ij = −1`.
    pub fn extremal_from_bits(m: usize, bits: &str) -> Result<Self, VolterraError> {
        if m < 2 {
            return Err(VolterraError::BadDimension(m));
        }
        let pairs = m * (m - 1) / 2;
        if bits.len() != pairs {
            return Err(VolterraError::BadSpec(
                format!("extremal:{bits}"),
                format!("expected {pairs} bits for m = {m}, got {}", bits.len()),
            ));
        }
        let mut a = vec![0.0; m * m];
        let mut t = 0;
        for i in 0..m {
            for j in (i + 1)..m {
                let sign = match bits.as_bytes()[t] {
                    b'1' => 1.0,
                    b'0' => -1.0,
                    c => {
                        return Err(VolterraError::BadSpec(
                            format!("extremal:{bits}"),
                            format!("bit {t} is `{}`, expected 0 or 1", c as char),
                        ))
                    }
                };
                a[i * m + j] = sign;
                a[j * m + i] = -sign;
                t += 1;
            }
        }
        Ok(Self { m, a })
    }

    /// The bitstring address when every off-diagonal entry is `±1`.
    pub fn bits_if_extremal(&self) -> Option<String> {
        let mut bits = String::with_capacity(self.m * (self.m - 1) / 2);
        for i in 0..self.m {
            for j in (i + 1)..self.m {
                let v = self.a[i * self.m + j];
                if v == 1.0 {
                    bits.push('1');
                } else if v == -1.0 {
                    bits.push('0');
                } else {
                    return None;
                }
            }
        }
        Some(bits)
    }

    /// All `2^{m(m−1)/2}` extremal operators, in lexicographic order of the
    /// sign vector over pairs `(i, j)` with `i < j` (all `−1` first).
    pub fn enumerate_extremal(m: usize) -> Result<Vec<Self>, VolterraError> {
        if m < 2 {
            return Err(VolterraError::BadDimension(m));
        }
        let pairs = m * (m - 1) / 2;
        if pairs > 30 {
            return Err(VolterraError::EnumerationTooLarge { m, pairs });
        }
        let count = 1usize << pairs;
        let mut out = Vec::with_capacity(count);
        for code in 0..count {
            let bits: String = (0..pairs)
                .map(|t| {
                    if code >> (pairs - 1 - t) & 1 == 1 {
                        '1'
                    } else {
                        '0'
                    }
                })
                .collect();
            out.push(Self::extremal_from_bits(m, &bits)?);
        }
        Ok(out)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Entry `a_ki` (row `k`, column `i`), 0-based.
    pub fn entry(&self, k: usize, i: usize) -> f64 {
        self.a[k * self.m + i]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.m)
            .map(|k| self.a[k * self.m..(k + 1) * self.m].to_vec())
            .collect()
    }

    /// Whether `(Vx)_k = x_k²` holds for every x, i.e. row `k` is all `−1`
    /// off the diagonal.
    pub fn is_squaring_for(&self, k: usize) -> bool {
        (0..self.m).all(|i| i == k || self.entry(k, i) == -1.0)
    }

    /// Apply the operator coordinate-wise, then renormalize.
    pub fn apply(&self, x: &SimplexPoint) -> Result<SimplexPoint, VolterraError> {
        if x.m() != self.m {
            return Err(VolterraError::DimensionMismatch {
                op: self.m,
                point: x.m(),
            });
        }
        let mut out = vec![0.0; self.m];
        self.apply_kernel(x.coords(), &mut out)?;
        Ok(SimplexPoint::from_normalized(out))
    }

    /// Raw application: `out_k = x_k (1 + Σ_i a_ki x_i)`, clamped and
    /// renormalized in place. Callers guarantee matching lengths.
    pub(crate) fn apply_kernel(&self, x: &[f64], out: &mut [f64]) -> Result<(), SimplexError> {
        let m = self.m;
        for k in 0..m {
            let row = &self.a[k * m..(k + 1) * m];
            let mut s = 0.0;
            for i in 0..m {
                s += row[i] * x[i];
            }
            out[k] = x[k] * (1.0 + s);
        }
        normalize_in_place(out)
    }

    /// The heredity-coefficient tensor of this operator:
    /// `p_iii = 1`, `p_ik,k = (1 + a_ki)/2`, `p_ik,i = (1 − a_ki)/2`,
    /// everything else 0.
    pub fn tensor(&self) -> QsoTensor {
        let m = self.m;
        let mut p = vec![0.0; m * m * m];
        let idx = |i: usize, j: usize, k: usize| (i * m + j) * m + k;
        for i in 0..m {
            p[idx(i, i, i)] = 1.0;
            for k in 0..m {
                if k == i {
                    continue;
                }
                let to_k = (1.0 + self.entry(k, i)) / 2.0;
                let to_i = (1.0 - self.entry(k, i)) / 2.0;
                p[idx(i, k, k)] = to_k;
                p[idx(k, i, k)] = to_k;
                p[idx(i, k, i)] = to_i;
                p[idx(k, i, i)] = to_i;
            }
        }
        QsoTensor { m, p }
    }

    /// `(Vx)_k ≤ 2 x_k` for every coordinate (within 1e-12.)
    ///
    /// True for every valid Volterra operator; exposed as a test oracle.
    pub fn satisfies_doubling(&self, x: &SimplexPoint) -> Result<bool, VolterraError> {
        let y = self.apply(x)?;
        Ok((0..self.m).all(|k| y.get(k) <= 2.0 * x.get(k) + STRUCT_TOLERANCE))
    }
}

impl Serialize for VolterraOperator {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        MatrixForm {
            m: self.m,
            a: self.rows(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for VolterraOperator {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = MatrixForm::deserialize(deserializer)?;
        if raw.a.len() != raw.m {
            return Err(serde::de::Error::custom(format!(
                "matrix has {} rows, expected m = {}",
                raw.a.len(),
                raw.m
            )));
        }
        VolterraOperator::new(&raw.a).map_err(serde::de::Error::custom)
    }
}

/// Wire form `{"m": ..., "A": [[...]]}` (row-major).
#[derive(Serialize, Deserialize)]
struct MatrixForm {
    m: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
}

/// A full QSO coefficient tensor `p[i][j][k]`.
///
/// Invariants: `p_ijk = p_jik ≥ 0` and `Σ_k p_ijk = 1` for every pair.
/// This is the O(m³) reference evaluation path; the matrix form is the
/// production path.
#[derive(Debug, Clone, PartialEq)]
pub struct QsoTensor {
    m: usize,
    /// `p[(i*m + j)*m + k]`.
    p: Vec<f64>,
}

impl QsoTensor {
    pub fn new(m: usize, p: Vec<f64>) -> Result<Self, VolterraError> {
        if m < 2 {
            return Err(VolterraError::BadDimension(m));
        }
        if p.len() != m * m * m {
            return Err(VolterraError::BadTensor(format!(
                "expected {} entries, got {}",
                m * m * m,
                p.len()
            )));
        }
        let t = Self { m, p };
        for i in 0..m {
            for j in 0..m {
                let mut row = 0.0;
                for k in 0..m {
                    let v = t.get(i, j, k);
                    if !v.is_finite() || v < -STRUCT_TOLERANCE {
                        return Err(VolterraError::BadTensor(format!(
                            "p[{i}][{j}][{k}] = {v} is negative or non-finite"
                        )));
                    }
                    if (v - t.get(j, i, k)).abs() > STRUCT_TOLERANCE {
                        return Err(VolterraError::BadTensor(format!(
                            "p[{i}][{j}][{k}] != p[{j}][{i}][{k}]"
                        )));
                    }
                    row += v;
                }
                if (row - 1.0).abs() > STRUCT_TOLERANCE {
                    return Err(VolterraError::BadTensor(format!(
                        "Σ_k p[{i}][{j}][k] = {row}, expected 1"
                    )));
                }
            }
        }
        Ok(t)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.p[(i * self.m + j) * self.m + k]
    }

    /// Full quadratic-form evaluation `x'_k = Σ_{i,j} p_ijk x_i x_j`.
    pub fn apply(&self, x: &SimplexPoint) -> Result<SimplexPoint, VolterraError> {
        if x.m() != self.m {
            return Err(VolterraError::DimensionMismatch {
                op: self.m,
                point: x.m(),
            });
        }
        let c = x.coords();
        let mut out = vec![0.0; self.m];
        for k in 0..self.m {
            let mut acc = 0.0;
            for i in 0..self.m {
                for j in 0..self.m {
                    acc += self.get(i, j, k) * c[i] * c[j];
                }
            }
            out[k] = acc;
        }
        normalize_in_place(&mut out)?;
        Ok(SimplexPoint::from_normalized(out))
    }

    /// Recover the skew-symmetric matrix, rejecting tensors that violate
    /// the Volterra zero pattern `p_ijk = 0` for `k ∉ {i, j}`.
    pub fn to_matrix(&self) -> Result<VolterraOperator, VolterraError> {
        let m = self.m;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    if k != i && k != j {
                        let v = self.get(i, j, k);
                        if v.abs() > STRUCT_TOLERANCE {
                            return Err(VolterraError::NotVolterra { i, j, k, value: v });
                        }
                    }
                }
            }
        }
        let mut rows = vec![vec![0.0; m]; m];
        for k in 0..m {
            for i in 0..m {
                if i != k {
                    // a_ki = 2 p_{ik,k} − 1
                    rows[k][i] = 2.0 * self.get(i, k, k) - 1.0;
                }
            }
        }
        VolterraOperator::new(&rows)
    }
}

/// External addressing for operators: a JSON matrix object, an
/// `"extremal:<bits>"` string, or a `"squaring:<k>"` string (`k` 1-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OperatorSpec {
    Text(String),
    Matrix {
        m: usize,
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
    },
}

impl OperatorSpec {
    /// Resolve against the campaign dimension `m`.
    pub fn resolve(&self, m: usize) -> Result<VolterraOperator, VolterraError> {
        match self {
            OperatorSpec::Text(s) => {
                if let Some(k) = s.strip_prefix("squaring:") {
                    let k: usize = k.parse().map_err(|_| {
                        VolterraError::BadSpec(s.clone(), "expected squaring:<k>".into())
                    })?;
                    if k == 0 || k > m {
                        return Err(VolterraError::BadSpec(
                            s.clone(),
                            format!("coordinate index must be in 1..={m}"),
                        ));
                    }
                    VolterraOperator::squaring(m, k - 1)
                } else if let Some(bits) = s.strip_prefix("extremal:") {
                    VolterraOperator::extremal_from_bits(m, bits)
                } else {
                    Err(VolterraError::BadSpec(
                        s.clone(),
                        "expected squaring:<k> or extremal:<bits>".into(),
                    ))
                }
            }
            OperatorSpec::Matrix { m: spec_m, a } => {
                if *spec_m != m {
                    return Err(VolterraError::DimensionMismatch { op: *spec_m, point: m });
                }
                if a.len() != *spec_m {
                    return Err(VolterraError::BadShape {
                        m: *spec_m,
                        row: a.len(),
                        len: a.first().map_or(0, Vec::len),
                    });
                }
                VolterraOperator::new(a)
            }
        }
    }
}

impl From<&VolterraOperator> for OperatorSpec {
    fn from(op: &VolterraOperator) -> Self {
        OperatorSpec::Matrix {
            m: op.m(),
            a: op.rows(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    pub(crate) fn random_operator(rng: &mut SplitMix64, m: usize) -> VolterraOperator {
        let mut rows = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in (i + 1)..m {
                let v = 2.0 * rng.next_f64() - 1.0;
                rows[i][j] = v;
                rows[j][i] = -v;
            }
        }
        VolterraOperator::new(&rows).unwrap()
    }

    pub(crate) fn random_interior_point(rng: &mut SplitMix64, m: usize) -> SimplexPoint {
        SimplexPoint::validate(&rng.next_dirichlet(1.0, m)).unwrap()
    }

    #[test]
    fn rejects_non_skew_and_oversized_entries() {
        assert!(matches!(
            VolterraOperator::new(&[vec![0.0, 0.5], vec![0.5, 0.0]]),
            Err(VolterraError::NotSkewSymmetric { .. })
        ));
        assert!(matches!(
            VolterraOperator::new(&[vec![0.0, 3.0], vec![-3.0, 0.0]]),
            Err(VolterraError::EntryOutOfRange { .. })
        ));
        assert!(matches!(
            VolterraOperator::new(&[vec![0.2, 0.0], vec![0.0, 0.0]]),
            Err(VolterraError::NotSkewSymmetric { .. })
        ));
    }

    #[test]
    fn identity_operator_fixes_everything() {
        let id = VolterraOperator::identity(3).unwrap();
        let x = SimplexPoint::validate(&[0.2, 0.3, 0.5]).unwrap();
        assert_eq!(id.apply(&x).unwrap(), x);
    }

    #[test]
    fn vertices_are_fixed_points_exactly() {
        let mut rng = SplitMix64::new(17);
        for m in 2..=5 {
            let op = random_operator(&mut rng, m);
            for i in 0..m {
                let e = SimplexPoint::vertex(m, i).unwrap();
                assert_eq!(op.apply(&e).unwrap(), e, "m={m}, i={i}");
            }
        }
    }

    #[test]
    fn squaring_squares_exactly_one_coordinate() {
        for m in 2..=5 {
            for k in 0..m {
                let op = VolterraOperator::squaring(m, k).unwrap();
                assert!(op.is_squaring_for(k));
                let bary = SimplexPoint::barycenter(m).unwrap();
                let y = op.apply(&bary).unwrap();
                let b = 1.0 / m as f64;
                assert!((y.get(k) - b * b).abs() < 1e-15);
                // No Volterra operator squares two coordinates: each other
                // coordinate moved away from b².
                for i in 0..m {
                    if i != k {
                        assert!((y.get(i) - b * b).abs() > 1e-3, "m={m} k={k} i={i}");
                    }
                }
            }
        }
    }

    #[test]
    fn squaring_examples() {
        // m = 2, k = 0: (0.5, 0.5) -> (0.25, 0.75)
        let v1 = VolterraOperator::squaring(2, 0).unwrap();
        let x = SimplexPoint::validate(&[0.5, 0.5]).unwrap();
        let y = v1.apply(&x).unwrap();
        assert!((y.get(0) - 0.25).abs() < 1e-15);
        assert!((y.get(1) - 0.75).abs() < 1e-15);
        // m = 2, k = 1 mirrors it.
        let v2 = VolterraOperator::squaring(2, 1).unwrap();
        let y = v2.apply(&x).unwrap();
        assert!((y.get(0) - 0.75).abs() < 1e-15);
        assert!((y.get(1) - 0.25).abs() < 1e-15);
        // m = 3, k = 0 at the barycenter: (1/9, 4/9, 4/9).
        let v = VolterraOperator::squaring(3, 0).unwrap();
        let y = v.apply(&SimplexPoint::barycenter(3).unwrap()).unwrap();
        assert!((y.get(0) - 1.0 / 9.0).abs() < 1e-15);
        assert!((y.get(1) - 4.0 / 9.0).abs() < 1e-15);
        assert!((y.get(2) - 4.0 / 9.0).abs() < 1e-15);
        // Vertex e_k is fixed.
        let ek = SimplexPoint::vertex(3, 0).unwrap();
        assert_eq!(v.apply(&ek).unwrap(), ek);
    }

    #[test]
    fn squaring_over_keeps_free_block() {
        let base = VolterraOperator::new(&[
            vec![0.0, 0.4, 0.0],
            vec![-0.4, 0.0, -0.7],
            vec![0.0, 0.7, 0.0],
        ])
        .unwrap();
        let op = VolterraOperator::squaring_over(&base, 0).unwrap();
        assert!(op.is_squaring_for(0));
        assert_eq!(op.entry(1, 2), -0.7);
        assert_eq!(op.entry(2, 1), 0.7);
        assert!(VolterraOperator::squaring_over(&base, 3).is_err());
    }

    #[test]
    fn tensor_matrix_roundtrip_examples() {
        // A = 0, m = 2: p_{12,1} = p_{12,2} = 1/2.
        let id = VolterraOperator::identity(2).unwrap();
        let t = id.tensor();
        assert_eq!(t.get(0, 1, 0), 0.5);
        assert_eq!(t.get(0, 1, 1), 0.5);
        assert_eq!(t.to_matrix().unwrap(), id);
        // a_12 = 1 (so a_21 = −1): p_{12,2} = 0, p_{12,1} = 1.
        let op = VolterraOperator::new(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let t = op.tensor();
        assert_eq!(t.get(0, 1, 1), 0.0);
        assert_eq!(t.get(0, 1, 0), 1.0);
        // p_{12,1} = 1 recovers a_12 = 1.
        let back = t.to_matrix().unwrap();
        assert_eq!(back.entry(0, 1), 1.0);
    }

    #[test]
    fn tensor_rows_are_stochastic() {
        let mut rng = SplitMix64::new(23);
        let op = random_operator(&mut rng, 4);
        let t = op.tensor();
        for i in 0..4 {
            for j in 0..4 {
                let row: f64 = (0..4).map(|k| t.get(i, j, k)).sum();
                assert!((row - 1.0).abs() <= STRUCT_TOLERANCE);
            }
        }
    }

    #[test]
    fn non_volterra_tensor_is_rejected() {
        let id = VolterraOperator::identity(3).unwrap();
        let t = id.tensor();
        let mut p = t.p.clone();
        // Shift mass of pair (1,2) onto k = 3: breaks the zero pattern but
        // keeps stochasticity.
        let idx = |i: usize, j: usize, k: usize| (i * 3 + j) * 3 + k;
        p[idx(0, 1, 2)] = 0.1;
        p[idx(1, 0, 2)] = 0.1;
        p[idx(0, 1, 0)] -= 0.1;
        p[idx(1, 0, 0)] -= 0.1;
        let bad = QsoTensor::new(3, p).unwrap();
        assert!(matches!(
            bad.to_matrix(),
            Err(VolterraError::NotVolterra { .. })
        ));
    }

    #[test]
    fn matrix_and_tensor_paths_agree() {
        let mut rng = SplitMix64::new(31);
        for _ in 0..50 {
            let m = 2 + (rng.next_u64() % 4) as usize;
            let op = random_operator(&mut rng, m);
            let x = random_interior_point(&mut rng, m);
            let fast = op.apply(&x).unwrap();
            let slow = op.tensor().apply(&x).unwrap();
            for k in 0..m {
                assert!(
                    (fast.get(k) - slow.get(k)).abs() < 1e-12,
                    "m={m} k={k}: {} vs {}",
                    fast.get(k),
                    slow.get(k)
                );
            }
        }
    }

    #[test]
    fn extremal_enumeration_counts() {
        assert_eq!(VolterraOperator::enumerate_extremal(2).unwrap().len(), 2);
        assert_eq!(VolterraOperator::enumerate_extremal(3).unwrap().len(), 8);
        let ops = VolterraOperator::enumerate_extremal(4).unwrap();
        assert_eq!(ops.len(), 64);
        for op in &ops {
            for i in 0..4 {
                for j in 0..4 {
                    if i != j {
                        assert_eq!(op.entry(i, j).abs(), 1.0);
                    }
                    assert_eq!(op.entry(i, j), -op.entry(j, i));
                }
            }
        }
        assert!(VolterraOperator::enumerate_extremal(9).is_err());
    }

    #[test]
    fn extremal_bits_roundtrip_and_order() {
        let ops = VolterraOperator::enumerate_extremal(3).unwrap();
        assert_eq!(ops[0].bits_if_extremal().unwrap(), "000");
        assert_eq!(ops[7].bits_if_extremal().unwrap(), "111");
        assert_eq!(ops[3].bits_if_extremal().unwrap(), "011");
        for (i, op) in ops.iter().enumerate() {
            let bits = op.bits_if_extremal().unwrap();
            let back = VolterraOperator::extremal_from_bits(3, &bits).unwrap();
            assert_eq!(&back, op, "index {i}");
        }
        assert!(VolterraOperator::squaring(3, 0)
            .unwrap()
            .bits_if_extremal()
            .is_none());
    }

    #[test]
    fn doubling_bound_sampled() {
        let mut rng = SplitMix64::new(37);
        let extremals = VolterraOperator::enumerate_extremal(3).unwrap();
        for i in 0..200 {
            let op = &extremals[(rng.next_u64() % 8) as usize];
            let x = random_interior_point(&mut rng, 3);
            assert!(op.satisfies_doubling(&x).unwrap(), "trial {i}");
        }
    }

    #[test]
    fn zero_coordinates_are_invariant() {
        let mut rng = SplitMix64::new(41);
        let op = random_operator(&mut rng, 4);
        let x = SimplexPoint::validate(&[0.0, 0.5, 0.0, 0.5]).unwrap();
        let y = op.apply(&x).unwrap();
        assert_eq!(y.get(0), 0.0);
        assert_eq!(y.get(2), 0.0);
        assert!(y.get(1) > 0.0 && y.get(3) > 0.0);
    }

    #[test]
    fn interior_is_preserved() {
        let mut rng = SplitMix64::new(43);
        for _ in 0..100 {
            let op = random_operator(&mut rng, 3);
            let x = random_interior_point(&mut rng, 3);
            assert!(op.apply(&x).unwrap().is_interior());
        }
    }

    #[test]
    fn json_wire_format() {
        let op = VolterraOperator::squaring(2, 0).unwrap();
        let json = serde_json::to_string(&op).unwrap();
        assert_eq!(json, r#"{"m":2,"A":[[0.0,-1.0],[1.0,0.0]]}"#);
        let back: VolterraOperator = serde_json::from_str(&json).unwrap();
        assert_eq!(back, op);
        let bad = r#"{"m":2,"A":[[0.0,0.5],[0.4,0.0]]}"#;
        assert!(serde_json::from_str::<VolterraOperator>(bad).is_err());
    }

    #[test]
    fn operator_spec_resolution() {
        let sq: OperatorSpec = serde_json::from_str(r#""squaring:2""#).unwrap();
        let op = sq.resolve(3).unwrap();
        assert!(op.is_squaring_for(1));
        let ex: OperatorSpec = serde_json::from_str(r#""extremal:101""#).unwrap();
        let op = ex.resolve(3).unwrap();
        assert_eq!(op.entry(0, 1), 1.0);
        assert_eq!(op.entry(0, 2), -1.0);
        assert_eq!(op.entry(1, 2), 1.0);
        let mat: OperatorSpec = serde_json::from_str(r#"{"m":2,"A":[[0,1],[-1,0]]}"#).unwrap();
        assert!(mat.resolve(2).is_ok());
        assert!(mat.resolve(3).is_err());
        assert!(OperatorSpec::Text("squaring:9".into()).resolve(3).is_err());
        assert!(OperatorSpec::Text("wat".into()).resolve(3).is_err());
    }
}
