//! Random iteration of Volterra operators.
//!
//! An [`OperatorEnsemble`] is a finite family `{V_1, ..., V_l}` with
//! sampling weights `ν`; the first `m` members must be the vertex-squaring
//! operators (`(V_k x)_k = x_k²`), which is exactly the hypothesis that
//! forces almost-sure absorption at a vertex under i.i.d. composition.
//! The engine tracks, alongside the state, the per-coordinate log-process
//! `Z^i_n = log x_i(n)` and its cut-off companion `Y^i_n` whose increments
//! are floored at `−d`; the derived constants `(r, N, q, d, D)` quantify
//! the per-block hitting probability of the vertex neighborhoods and the
//! guaranteed downward drift of `Y` below the cut level.

mod block;
mod deterministic;
mod trajectory;

pub use block::{estimate_block_success, estimate_block_success_on_grid, BlockSuccessReport, PointEstimate};
pub use deterministic::{run_deterministic_trajectory, DeterministicDiagnostics};
pub use trajectory::{
    hitting_time_u_epsilon, run_random_trajectory, stopping_time_trace, ConvergenceCriterion,
    CoordMoments, DriftAccumulator, EscapeCycle, TrajectoryRecord, TrajectorySummary,
    UEpsilonHit, Verdict,
};
pub(crate) use trajectory::run_summarized;

use serde::Serialize;
use thiserror::Error;

use crate::rng::SplitMix64;
use crate::simplex::SimplexError;
use crate::volterra::{VolterraError, VolterraOperator};

/// States below this are flushed to exact zero; the trajectory then runs on
/// the support face, which is exact for Volterra dynamics.
pub const UNDERFLOW_FLOOR: f64 = 1e-300;

/// Multiplicative margin lifting the cut depth `d` strictly above its
/// threshold so `D > 0` holds numerically.
pub const CUTOFF_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnsembleError {
    #[error("ensemble must contain at least one operator")]
    Empty,
    #[error("ensemble needs at least m = {m} operators, got {got}")]
    TooFewOperators { m: usize, got: usize },
    #[error("operator {index} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error(
        "operator {k} (1-based) must square coordinate {k}: its matrix row must be -1 off the \
         diagonal. Absorption at a vertex requires every vertex-squaring operator to be present \
         with positive weight."
    )]
    MissingSquaring { k: usize },
    #[error("got {weights} weights for {ops} operators")]
    WeightCount { ops: usize, weights: usize },
    #[error("weight {index} is {value}; all weights must be positive and finite")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("weights sum to {sum}, expected 1 within 1e-12")]
    WeightSum { sum: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("epsilon must be in (0, 1), got {0}")]
    BadEpsilon(f64),
    #[error("horizon must be at least 1")]
    BadHorizon,
    #[error("convergence threshold delta must be in (0, 1/2), got {0}")]
    BadDelta(f64),
    #[error("convergence run length K must be at least 1")]
    BadK,
    #[error("need at least one trial")]
    BadTrials,
    #[error("block length must be at least 1")]
    BadBlock,
    #[error("cut depth {d} must exceed the threshold {threshold}")]
    CutoffTooSmall { d: f64, threshold: f64 },
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Volterra(#[from] VolterraError),
    #[error(transparent)]
    Simplex(#[from] SimplexError),
}

/// Finite family of Volterra operators with sampling weights `ν`.
///
/// Invariants: all operators share the dimension `m`; there are at least
/// `m` of them; operator `k` (for `k < m`) squares coordinate `k`; all
/// weights are positive and sum to 1 within 1e-12.
#[derive(Debug, Clone)]
pub struct OperatorEnsemble {
    m: usize,
    ops: Vec<VolterraOperator>,
    nu: Vec<f64>,
    cumulative: Vec<f64>,
}

impl OperatorEnsemble {
    pub fn new(ops: Vec<VolterraOperator>, nu: Vec<f64>) -> Result<Self, EnsembleError> {
        let Some(first) = ops.first() else {
            return Err(EnsembleError::Empty);
        };
        let m = first.m();
        if ops.len() < m {
            return Err(EnsembleError::TooFewOperators { m, got: ops.len() });
        }
        for (index, op) in ops.iter().enumerate() {
            if op.m() != m {
                return Err(EnsembleError::DimensionMismatch {
                    index,
                    expected: m,
                    got: op.m(),
                });
            }
        }
        for k in 0..m {
            if !ops[k].is_squaring_for(k) {
                return Err(EnsembleError::MissingSquaring { k: k + 1 });
            }
        }
        if nu.len() != ops.len() {
            return Err(EnsembleError::WeightCount {
                ops: ops.len(),
                weights: nu.len(),
            });
        }
        for (index, &value) in nu.iter().enumerate() {
            if !(value > 0.0) || !value.is_finite() {
                return Err(EnsembleError::NonPositiveWeight { index, value });
            }
        }
        let sum: f64 = nu.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(EnsembleError::WeightSum { sum });
        }
        let mut cumulative = Vec::with_capacity(nu.len());
        let mut acc = 0.0;
        for &w in &nu {
            acc += w;
            cumulative.push(acc);
        }
        Ok(Self {
            m,
            ops,
            nu,
            cumulative,
        })
    }

    /// The `m` vertex-squaring operators under uniform weights.
    pub fn uniform_squaring(m: usize) -> Result<Self, DynamicsError> {
        let ops = (0..m)
            .map(|k| VolterraOperator::squaring(m, k))
            .collect::<Result<Vec<_>, _>>()?;
        let nu = vec![1.0 / m as f64; m];
        Ok(Self::new(ops, nu)?)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn ops(&self) -> &[VolterraOperator] {
        &self.ops
    }

    pub fn weights(&self) -> &[f64] {
        &self.nu
    }

    /// Inverse-CDF lookup over half-open cells `[c_{k−1}, c_k)`.
    pub fn index_for_uniform(&self, u: f64) -> usize {
        for (k, &c) in self.cumulative.iter().enumerate() {
            if u < c {
                return k;
            }
        }
        self.ops.len() - 1
    }

    /// Draw an operator index, advancing the generator.
    pub fn sample(&self, rng: &mut SplitMix64) -> usize {
        self.index_for_uniform(rng.next_f64())
    }
}

/// The constants of the block-hitting and drift estimates, bundled with
/// their defining formulas (see [`DriftConstants::describe`]).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftConstants {
    pub epsilon: f64,
    /// Smallest integer with `−2^r + (m−2) r < log2(ε)`.
    pub r: u32,
    /// Block length `N = r (m − 1)`.
    #[serde(rename = "N")]
    pub block_len: usize,
    /// Per-block success floor `q = Π_i ν_i^r` over the squaring weights.
    #[serde(rename = "q")]
    pub block_prob: f64,
    /// Cut depth `d`, strictly above `max{log m, max_i log(2)/ν_i}`.
    #[serde(rename = "d")]
    pub cutoff: f64,
    /// Guaranteed downward drift `D = min_i {ν_i d − log 2} > 0`.
    #[serde(rename = "D")]
    pub drift: f64,
}

impl DriftConstants {
    /// The quantities with the formulas they came from.
    pub fn describe(&self) -> String {
        format!(
            "epsilon = {}\n\
             r = {}  (smallest integer with -2^r + (m-2) r < log2(epsilon))\n\
             N = {}  (N = r (m-1))\n\
             q = {:e}  (q = prod_i nu_i^r over the m squaring weights)\n\
             d = {}  (d > max{{log m, max_i log(2)/nu_i}}, margin 1e-6)\n\
             D = {:e}  (D = min_i {{nu_i d - log 2}})",
            self.epsilon, self.r, self.block_len, self.block_prob, self.cutoff, self.drift
        )
    }
}

/// The threshold the cut depth must strictly exceed.
pub fn cutoff_threshold(ensemble: &OperatorEnsemble) -> f64 {
    let m = ensemble.m() as f64;
    let ln2 = std::f64::consts::LN_2;
    let mut t = m.ln();
    for &w in &ensemble.weights()[..ensemble.m()] {
        t = t.max(ln2 / w);
    }
    t
}

/// The cut depth used by the engine: threshold × (1 + 1e-6).
pub fn cutoff_depth(ensemble: &OperatorEnsemble) -> f64 {
    cutoff_threshold(ensemble) * (1.0 + CUTOFF_MARGIN)
}

/// Derive `(r, N, q, d, D)` for a target neighborhood radius `ε`.
pub fn derive_constants(
    ensemble: &OperatorEnsemble,
    epsilon: f64,
) -> Result<DriftConstants, DynamicsError> {
    derive_with_cutoff(ensemble, epsilon, cutoff_depth(ensemble))
}

/// Same, but with an explicit cut depth `d` (must strictly exceed the
/// threshold so that `D > 0`).
pub fn derive_constants_with_cutoff(
    ensemble: &OperatorEnsemble,
    epsilon: f64,
    cutoff: f64,
) -> Result<DriftConstants, DynamicsError> {
    let threshold = cutoff_threshold(ensemble);
    if !(cutoff > threshold) {
        return Err(DynamicsError::CutoffTooSmall {
            d: cutoff,
            threshold,
        });
    }
    derive_with_cutoff(ensemble, epsilon, cutoff)
}

/// Constants for a possibly trivial radius: `ε ≥ 1` means membership in
/// `U_ε` is automatic, but `(r, N, q)` are still derived from a radius
/// inside the open interval.
pub(crate) fn derive_with_clamped_epsilon(
    ensemble: &OperatorEnsemble,
    epsilon: f64,
) -> Result<DriftConstants, DynamicsError> {
    let effective = if epsilon < 1.0 {
        epsilon
    } else {
        1.0 - 1e-9
    };
    derive_constants(ensemble, effective)
}

fn derive_with_cutoff(
    ensemble: &OperatorEnsemble,
    epsilon: f64,
    cutoff: f64,
) -> Result<DriftConstants, DynamicsError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(DynamicsError::BadEpsilon(epsilon));
    }
    let m = ensemble.m();
    let log2_eps = epsilon.ln() / std::f64::consts::LN_2;
    let mut r = 1u32;
    while -(2f64.powi(r as i32)) + ((m as f64) - 2.0) * r as f64 >= log2_eps {
        r += 1;
        assert!(r <= 64, "block exponent search exceeded 64");
    }
    let block_len = r as usize * (m - 1);
    let block_prob = ensemble.weights()[..m]
        .iter()
        .map(|w| w.powi(r as i32))
        .product();
    let ln2 = std::f64::consts::LN_2;
    let drift = ensemble.weights()[..m]
        .iter()
        .map(|w| w * cutoff - ln2)
        .fold(f64::INFINITY, f64::min);
    Ok(DriftConstants {
        epsilon,
        r,
        block_len,
        block_prob,
        cutoff,
        drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::SimplexPoint;

    #[test]
    fn ensemble_validation() {
        let v1 = VolterraOperator::squaring(3, 0).unwrap();
        let v2 = VolterraOperator::squaring(3, 1).unwrap();
        let v3 = VolterraOperator::squaring(3, 2).unwrap();
        let third = 1.0 / 3.0;
        assert!(OperatorEnsemble::new(
            vec![v1.clone(), v2.clone(), v3.clone()],
            vec![third, third, third]
        )
        .is_ok());
        // Wrong order: operator 2 does not square coordinate 2.
        assert!(matches!(
            OperatorEnsemble::new(
                vec![v1.clone(), v3.clone(), v2.clone()],
                vec![third, third, third]
            ),
            Err(EnsembleError::MissingSquaring { k: 2 })
        ));
        assert!(matches!(
            OperatorEnsemble::new(vec![v1.clone(), v2.clone()], vec![0.5, 0.5]),
            Err(EnsembleError::TooFewOperators { .. })
        ));
        assert!(matches!(
            OperatorEnsemble::new(
                vec![v1.clone(), v2.clone(), v3.clone()],
                vec![0.5, 0.5, 0.0]
            ),
            Err(EnsembleError::NonPositiveWeight { .. })
        ));
        assert!(matches!(
            OperatorEnsemble::new(vec![v1, v2, v3], vec![0.4, 0.4, 0.4]),
            Err(EnsembleError::WeightSum { .. })
        ));
    }

    #[test]
    fn inverse_cdf_cells_are_half_open() {
        let ops = vec![
            VolterraOperator::squaring(2, 0).unwrap(),
            VolterraOperator::squaring(2, 1).unwrap(),
        ];
        let ens = OperatorEnsemble::new(ops, vec![0.2, 0.8]).unwrap();
        assert_eq!(ens.index_for_uniform(0.0), 0);
        assert_eq!(ens.index_for_uniform(0.19999), 0);
        assert_eq!(ens.index_for_uniform(0.2), 1);
        assert_eq!(ens.index_for_uniform(0.999999), 1);
        let ens5050 = OperatorEnsemble::uniform_squaring(2).unwrap();
        assert_eq!(ens5050.index_for_uniform(0.3), 0);
    }

    #[test]
    fn sampling_frequencies_match_weights() {
        let ops = vec![
            VolterraOperator::squaring(2, 0).unwrap(),
            VolterraOperator::squaring(2, 1).unwrap(),
        ];
        let ens = OperatorEnsemble::new(ops, vec![0.2, 0.8]).unwrap();
        let mut rng = SplitMix64::new(99);
        let n = 1_000_000u64;
        let mut counts = [0u64; 2];
        for _ in 0..n {
            counts[ens.sample(&mut rng)] += 1;
        }
        for (k, &target) in [0.2, 0.8].iter().enumerate() {
            let p = counts[k] as f64 / n as f64;
            let se = (target * (1.0 - target) / n as f64).sqrt();
            assert!(
                (p - target).abs() <= 3.0 * se,
                "index {k}: {p} vs {target} (se {se})"
            );
        }
    }

    #[test]
    fn derived_constants_m3_uniform() {
        let ens = OperatorEnsemble::uniform_squaring(3).unwrap();
        let c = derive_constants(&ens, 1e-3).unwrap();
        // r scan: r = 3 gives −8 + 3 = −5 ≥ log2(1e-3) ≈ −9.97; r = 4 gives −12 < −9.97.
        assert_eq!(c.r, 4);
        assert_eq!(c.block_len, 8);
        // q = (1/27)^4 = 3^{-12}, exact rational check.
        assert!((c.block_prob * 531_441.0 - 1.0).abs() < 1e-12);
        assert!(c.drift > 0.0);
        // d sits just above 3 log 2.
        let threshold = 3.0 * std::f64::consts::LN_2;
        assert!(c.cutoff > threshold);
        assert!(c.cutoff < threshold * 1.00001);
    }

    #[test]
    fn cutoff_override() {
        let ens = OperatorEnsemble::uniform_squaring(3).unwrap();
        let threshold = cutoff_threshold(&ens);
        assert!((threshold - 3.0 * std::f64::consts::LN_2).abs() < 1e-15);
        let c = derive_constants_with_cutoff(&ens, 1e-3, 2.1).unwrap();
        let expect = 2.1 / 3.0 - std::f64::consts::LN_2;
        assert!((c.drift - expect).abs() < 1e-15);
        assert!((c.drift - 0.0069).abs() < 1e-4);
        assert!(matches!(
            derive_constants_with_cutoff(&ens, 1e-3, 2.0),
            Err(DynamicsError::CutoffTooSmall { .. })
        ));
    }

    #[test]
    fn constants_reject_bad_epsilon() {
        let ens = OperatorEnsemble::uniform_squaring(3).unwrap();
        assert!(matches!(
            derive_constants(&ens, 0.0),
            Err(DynamicsError::BadEpsilon(_))
        ));
        assert!(matches!(
            derive_constants(&ens, 1.0),
            Err(DynamicsError::BadEpsilon(_))
        ));
        assert!(derive_constants(&ens, 0.5).is_ok());
    }

    #[test]
    fn describe_mentions_every_constant() {
        let ens = OperatorEnsemble::uniform_squaring(3).unwrap();
        let c = derive_constants(&ens, 1e-3).unwrap();
        let text = c.describe();
        for needle in ["r = 4", "N = 8", "q =", "d =", "D ="] {
            assert!(text.contains(needle), "missing `{needle}` in {text}");
        }
    }

    #[test]
    fn vertices_stay_fixed_under_sampled_ops() {
        let ens = OperatorEnsemble::uniform_squaring(4).unwrap();
        let mut rng = SplitMix64::new(5);
        for i in 0..4 {
            let e = SimplexPoint::vertex(4, i).unwrap();
            let mut x = e.clone();
            for _ in 0..32 {
                let k = ens.sample(&mut rng);
                x = ens.ops()[k].apply(&x).unwrap();
            }
            assert_eq!(x, e);
        }
    }
}
