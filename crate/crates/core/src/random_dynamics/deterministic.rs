//! Single-operator trajectory diagnostics.
//!
//! Deterministic Volterra orbits approach the boundary without converging
//! whenever the start is not a fixed point, and the approach can be
//! heteroclinic: the orbit dwells ever longer near one vertex, then the
//! next. Coordinates shrink below anything representable in linear f64
//! well before such cycling ends, so this engine iterates the map in log
//! coordinates, where a coordinate at `e^{-50000}` is just a finite number
//! that can climb back up. Linear-domain flushing would freeze the orbit
//! onto a face and manufacture a false absorption.
//!
//! The vertex verdict here is also stricter than the random engine's: a
//! heteroclinic dwell keeps the leader above `1 − δ` for arbitrarily long
//! stretches while the residual mass *grows* geometrically, so we require
//! the residual to be non-increasing across the qualifying window on top
//! of the leader threshold.

use std::collections::BTreeSet;

use serde::Serialize;

use super::{ConvergenceCriterion, DynamicsError, Verdict};
use crate::simplex::SimplexPoint;
use crate::volterra::VolterraOperator;

/// Log values below this are clamped; `exp` underflows to zero either way,
/// and the clamp keeps repeated squaring from overflowing the log itself.
const LOG_FLOOR: f64 = -1e15;

/// Diagnostics of a deterministic run.
#[derive(Debug, Clone, Serialize)]
pub struct DeterministicDiagnostics {
    pub steps: usize,
    /// Final state mapped back to linear scale (coordinates that fell
    /// below the representable range appear as exact zeros).
    pub final_state: Vec<f64>,
    /// Smallest coordinate at each step, linear scale.
    pub min_coord_series: Vec<f64>,
    pub min_coord: f64,
    pub min_coord_step: usize,
    /// Distinct leading coordinates observed over the run.
    pub leader_set: BTreeSet<usize>,
    pub verdict: Verdict,
}

struct ResidualTracker {
    log_delta: f64,
    k: usize,
    run: Option<(usize, usize, usize, f64)>, // (vertex, start, length, last log-residual)
    decided: Option<(usize, usize)>,
}

impl ResidualTracker {
    fn new(criterion: &ConvergenceCriterion) -> Self {
        Self {
            log_delta: criterion.delta.ln(),
            k: criterion.k,
            run: None,
            decided: None,
        }
    }

    fn observe(&mut self, step: usize, leader: usize, log_residual: f64) {
        if self.decided.is_some() {
            return;
        }
        let qualifies = log_residual < self.log_delta;
        let extend = match self.run {
            Some((v, _, _, last)) => v == leader && log_residual <= last + 1e-12,
            None => false,
        };
        if qualifies {
            let (vertex, start, len) = if extend {
                let (v, s, l, _) = self.run.unwrap();
                (v, s, l + 1)
            } else {
                (leader, step, 1)
            };
            self.run = Some((vertex, start, len, log_residual));
            if len >= self.k {
                self.decided = Some((vertex, start));
            }
        } else {
            self.run = None;
        }
    }

    fn verdict(&self) -> Verdict {
        match self.decided {
            Some((vertex, step)) => Verdict::Converged { vertex, step },
            None => Verdict::Undecided,
        }
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Iterate a single operator from `x0` for `horizon` steps in log domain.
pub fn run_deterministic_trajectory(
    op: &VolterraOperator,
    x0: &SimplexPoint,
    horizon: usize,
    criterion: &ConvergenceCriterion,
) -> Result<DeterministicDiagnostics, DynamicsError> {
    if x0.m() != op.m() {
        return Err(crate::volterra::VolterraError::DimensionMismatch {
            op: op.m(),
            point: x0.m(),
        }
        .into());
    }
    if horizon == 0 {
        return Err(DynamicsError::BadHorizon);
    }
    criterion.validate()?;

    let m = op.m();
    let mut log_x: Vec<f64> = x0
        .coords()
        .iter()
        .map(|&v| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY })
        .collect();
    let mut linear = vec![0.0; m];
    let mut next = vec![0.0; m];

    let mut tracker = ResidualTracker::new(criterion);
    let mut leader_set = BTreeSet::new();
    let mut min_coord_series = Vec::with_capacity(horizon + 1);
    let mut min_coord = f64::INFINITY;
    let mut min_coord_step = 0usize;

    let mut record = |step: usize,
                      log_x: &[f64],
                      tracker: &mut ResidualTracker,
                      leader_set: &mut BTreeSet<usize>,
                      min_coord_series: &mut Vec<f64>,
                      min_coord: &mut f64,
                      min_coord_step: &mut usize| {
        let leader = crate::simplex::argmax_raw(log_x);
        leader_set.insert(leader);
        let log_residual = log_sum_exp(
            log_x
                .iter()
                .enumerate()
                .filter(move |&(i, _)| i != leader)
                .map(|(_, &v)| v),
        );
        tracker.observe(step, leader, log_residual);
        let lowest = log_x.iter().copied().fold(f64::INFINITY, f64::min).exp();
        min_coord_series.push(lowest);
        if lowest < *min_coord {
            *min_coord = lowest;
            *min_coord_step = step;
        }
    };

    record(
        0,
        &log_x,
        &mut tracker,
        &mut leader_set,
        &mut min_coord_series,
        &mut min_coord,
        &mut min_coord_step,
    );

    for step in 1..=horizon {
        for (i, v) in linear.iter_mut().enumerate() {
            *v = log_x[i].exp();
        }
        for k in 0..m {
            let mut s = 0.0;
            for i in 0..m {
                s += op.entry(k, i) * linear[i];
            }
            // 1 + s ≥ x_k > 0 in exact arithmetic; cancellation can still
            // drive it to zero for a vanishing coordinate.
            next[k] = log_x[k] + s.ln_1p();
        }
        let shift = log_sum_exp(next.iter().copied());
        for (k, v) in next.iter().enumerate() {
            let shifted = v - shift;
            log_x[k] = if shifted.is_nan() || shifted == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                shifted.max(LOG_FLOOR)
            };
        }
        record(
            step,
            &log_x,
            &mut tracker,
            &mut leader_set,
            &mut min_coord_series,
            &mut min_coord,
            &mut min_coord_step,
        );
    }

    let mut final_state: Vec<f64> = log_x.iter().map(|&v| v.exp()).collect();
    let total: f64 = final_state.iter().sum();
    for v in &mut final_state {
        *v /= total;
    }

    Ok(DeterministicDiagnostics {
        steps: horizon,
        final_state,
        min_coord_series,
        min_coord,
        min_coord_step,
        leader_set,
        verdict: tracker.verdict(),
    })
}
