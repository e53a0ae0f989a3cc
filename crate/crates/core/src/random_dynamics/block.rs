//! Empirical check of the block-hitting bound: from any start, a block of
//! `N` sampled operators lands in `U_ε` with probability at least
//! `q = Π ν_i^r`.

use serde::Serialize;

use super::{derive_with_clamped_epsilon, DynamicsError, OperatorEnsemble};
use crate::rng::SplitMix64;
use crate::simplex::{in_neighborhood_raw, simplex_lattice, SimplexPoint};
use crate::stats::{wilson_interval, Z_95};

/// Success statistics for one start point.
#[derive(Debug, Clone, Serialize)]
pub struct PointEstimate {
    pub start: Vec<f64>,
    pub successes: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockSuccessReport {
    pub epsilon: f64,
    #[serde(rename = "N")]
    pub block_len: usize,
    pub q: f64,
    pub points: Vec<PointEstimate>,
    /// Index into `points` of the smallest empirical probability.
    pub worst_point: usize,
    pub worst_p_hat: f64,
    /// No start point's Wilson 95% upper bound fell below `q`.
    pub consistent_with_q: bool,
}

/// Estimate the per-block success probability over the standard start
/// grid: the degree-4 lattice refinement of the simplex (15 points for
/// `m = 3`), which contains every vertex and interior refinement points.
pub fn estimate_block_success(
    ensemble: &OperatorEnsemble,
    epsilon: f64,
    trials: u64,
    seed: u64,
) -> Result<BlockSuccessReport, DynamicsError> {
    let grid = simplex_lattice(ensemble.m(), 4)?;
    estimate_block_success_on_grid(ensemble, epsilon, trials, seed, &grid)
}

/// Same, over an explicit start grid. The bound is uniform in the start
/// point; the finite grid approximates that uniformity.
pub fn estimate_block_success_on_grid(
    ensemble: &OperatorEnsemble,
    epsilon: f64,
    trials: u64,
    seed: u64,
    grid: &[SimplexPoint],
) -> Result<BlockSuccessReport, DynamicsError> {
    if trials == 0 {
        return Err(DynamicsError::BadTrials);
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(DynamicsError::BadEpsilon(epsilon));
    }
    assert!(!grid.is_empty(), "start grid must be nonempty");
    let m = ensemble.m();
    for p in grid {
        if p.m() != m {
            return Err(crate::volterra::VolterraError::DimensionMismatch {
                op: m,
                point: p.m(),
            }
            .into());
        }
    }
    // ε ≥ 1 makes membership trivial but the block constants are still
    // derived from a radius inside (0, 1).
    let constants = derive_with_clamped_epsilon(ensemble, epsilon)?;
    let n_block = constants.block_len;

    let mut points = Vec::with_capacity(grid.len());
    let mut current = vec![0.0; m];
    let mut next = vec![0.0; m];
    for (point_idx, start) in grid.iter().enumerate() {
        let mut successes = 0u64;
        for trial in 0..trials {
            let stream = point_idx as u64 * trials + trial;
            let mut rng = SplitMix64::for_stream(seed, stream);
            current.copy_from_slice(start.coords());
            for _ in 0..n_block {
                let op = ensemble.sample(&mut rng);
                ensemble.ops()[op]
                    .apply_kernel(&current, &mut next)
                    .expect("operator application preserves the simplex");
                std::mem::swap(&mut current, &mut next);
            }
            if in_neighborhood_raw(&current, epsilon).is_some() {
                successes += 1;
            }
        }
        let p_hat = successes as f64 / trials as f64;
        let (wilson_low, wilson_high) = wilson_interval(successes, trials, Z_95);
        points.push(PointEstimate {
            start: start.coords().to_vec(),
            successes,
            trials,
            p_hat,
            wilson_low,
            wilson_high,
        });
    }

    let worst_point = points
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.p_hat.total_cmp(&b.1.p_hat))
        .map(|(i, _)| i)
        .unwrap();
    let consistent_with_q = points.iter().all(|p| p.wilson_high >= constants.block_prob);
    Ok(BlockSuccessReport {
        epsilon,
        block_len: n_block,
        q: constants.block_prob,
        worst_p_hat: points[worst_point].p_hat,
        worst_point,
        points,
        consistent_with_q,
    })
}
