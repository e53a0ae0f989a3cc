//! The random trajectory engine and its instrumentation.

use serde::Serialize;

use super::{cutoff_depth, DynamicsError, OperatorEnsemble, UNDERFLOW_FLOOR};
use crate::rng::SplitMix64;
use crate::simplex::{argmax_raw, SimplexPoint};

/// Finite-time absorption detector: converged to vertex `j` once
/// `x_j > 1 − δ` holds over `K` consecutive states. A coordinate can at
/// most double per step, so a leader above `1 − δ` cannot fall below
/// `1 − 2(m−1)δ` in one step; `K` adds slack on top of that.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceCriterion {
    pub delta: f64,
    pub k: usize,
}

impl Default for ConvergenceCriterion {
    fn default() -> Self {
        Self { delta: 1e-9, k: 10 }
    }
}

impl ConvergenceCriterion {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(DynamicsError::BadDelta(self.delta));
        }
        if self.k == 0 {
            return Err(DynamicsError::BadK);
        }
        Ok(())
    }
}

/// Outcome of a finite run. `step` is the first state index of the
/// qualifying run, so a trajectory started at a vertex converges at step 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    Converged { vertex: usize, step: usize },
    Undecided,
}

impl Verdict {
    pub fn vertex(&self) -> Option<usize> {
        match self {
            Verdict::Converged { vertex, .. } => Some(*vertex),
            Verdict::Undecided => None,
        }
    }
}

/// One realized random orbit with its log-processes.
///
/// Indexing: `states[n+1] = ops[op_indices[n]] (states[n])`, and
/// `z[i][n] = log(states[n]_i)` with `−∞` marking coordinates at exact
/// zero (initially zero or flushed below [`UNDERFLOW_FLOOR`]). `y[i]`
/// starts at `z[i][0]` and accrues the `−d`-floored increments.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub x0: SimplexPoint,
    pub op_indices: Vec<usize>,
    pub states: Vec<SimplexPoint>,
    pub z: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub verdict: Verdict,
}

impl TrajectoryRecord {
    pub fn horizon(&self) -> usize {
        self.op_indices.len()
    }
}

struct AbsorptionTracker {
    delta: f64,
    k: usize,
    run: Option<(usize, usize, usize)>, // (vertex, start, length)
    decided: Option<(usize, usize)>,
}

impl AbsorptionTracker {
    fn new(criterion: &ConvergenceCriterion) -> Self {
        Self {
            delta: criterion.delta,
            k: criterion.k,
            run: None,
            decided: None,
        }
    }

    fn observe(&mut self, step: usize, x: &[f64]) {
        if self.decided.is_some() {
            return;
        }
        let j = argmax_raw(x);
        if x[j] > 1.0 - self.delta {
            let (vertex, start, len) = match self.run {
                Some((v, s, l)) if v == j => (v, s, l + 1),
                _ => (j, step, 1),
            };
            self.run = Some((vertex, start, len));
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

/// Per-step state of the engine: the point, its log-coordinates, and the
/// cut-off process.
struct StepState {
    x: Vec<f64>,
    next: Vec<f64>,
    z: Vec<f64>,
    y: Vec<f64>,
    cutoff: f64,
}

impl StepState {
    fn new(x0: &SimplexPoint, cutoff: f64) -> Self {
        let mut x = x0.coords().to_vec();
        for v in &mut x {
            if *v != 0.0 && *v < UNDERFLOW_FLOOR {
                *v = 0.0;
            }
        }
        let z: Vec<f64> = x
            .iter()
            .map(|&v| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY })
            .collect();
        let y = z.clone();
        Self {
            next: vec![0.0; x.len()],
            x,
            z,
            y,
            cutoff,
        }
    }

    /// Apply operator `op` of `ensemble`, flush underflow, update Z and Y.
    fn advance(&mut self, ensemble: &OperatorEnsemble, op: usize) {
        ensemble.ops()[op]
            .apply_kernel(&self.x, &mut self.next)
            .expect("operator application preserves the simplex");
        for v in &mut self.next {
            if *v != 0.0 && *v < UNDERFLOW_FLOOR {
                *v = 0.0;
            }
        }
        for i in 0..self.x.len() {
            let z_new = if self.next[i] > 0.0 {
                self.next[i].ln()
            } else {
                f64::NEG_INFINITY
            };
            let dz = z_new - self.z[i];
            // NaN (dead coordinate) and −∞ both fall to the floor.
            let inc = if dz >= -self.cutoff { dz } else { -self.cutoff };
            self.y[i] += inc;
            self.z[i] = z_new;
        }
        std::mem::swap(&mut self.x, &mut self.next);
    }
}

fn check_run_inputs(
    ensemble: &OperatorEnsemble,
    x0: &SimplexPoint,
    horizon: usize,
    criterion: &ConvergenceCriterion,
) -> Result<(), DynamicsError> {
    if x0.m() != ensemble.m() {
        return Err(crate::volterra::VolterraError::DimensionMismatch {
            op: ensemble.m(),
            point: x0.m(),
        }
        .into());
    }
    if horizon == 0 {
        return Err(DynamicsError::BadHorizon);
    }
    criterion.validate()
}

/// Run one random trajectory with a full record.
///
/// `seed` seeds the trajectory's own SplitMix64 stream; identical inputs
/// produce bit-identical records.
pub fn run_random_trajectory(
    ensemble: &OperatorEnsemble,
    x0: &SimplexPoint,
    horizon: usize,
    seed: u64,
    criterion: &ConvergenceCriterion,
) -> Result<TrajectoryRecord, DynamicsError> {
    check_run_inputs(ensemble, x0, horizon, criterion)?;
    let m = ensemble.m();
    let mut rng = SplitMix64::new(seed);
    let mut state = StepState::new(x0, cutoff_depth(ensemble));
    let mut tracker = AbsorptionTracker::new(criterion);

    let mut op_indices = Vec::with_capacity(horizon);
    let mut states = Vec::with_capacity(horizon + 1);
    let mut z = vec![Vec::with_capacity(horizon + 1); m];
    let mut y = vec![Vec::with_capacity(horizon + 1); m];

    let push = |state: &StepState,
                states: &mut Vec<SimplexPoint>,
                z: &mut Vec<Vec<f64>>,
                y: &mut Vec<Vec<f64>>| {
        states.push(SimplexPoint::from_normalized(state.x.clone()));
        for i in 0..state.x.len() {
            z[i].push(state.z[i]);
            y[i].push(state.y[i]);
        }
    };

    push(&state, &mut states, &mut z, &mut y);
    tracker.observe(0, &state.x);
    for n in 0..horizon {
        let op = ensemble.sample(&mut rng);
        state.advance(ensemble, op);
        op_indices.push(op);
        push(&state, &mut states, &mut z, &mut y);
        tracker.observe(n + 1, &state.x);
    }

    Ok(TrajectoryRecord {
        seed,
        x0: x0.clone(),
        op_indices,
        states,
        z,
        y,
        verdict: tracker.verdict(),
    })
}

/// Per-trajectory summary row of a campaign.
///
/// `verdict_vertex` is 1-based with 0 meaning undecided; step fields are
/// `−1` when the event did not occur within the horizon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectorySummary {
    pub seed_index: u64,
    pub verdict_vertex: usize,
    pub absorption_step: i64,
    pub hit_u_eps_step: i64,
    pub final_max_coord: f64,
}

/// Accumulated conditional moments of the Y-increments, restricted to
/// steps where the coordinate is alive (`Z` finite) and `Y ≤ −d`.
#[derive(Debug, Clone, Default, Serialize)]
pub struct CoordMoments {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl CoordMoments {
    pub fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    pub fn second_moment(&self) -> f64 {
        self.sum_sq / self.count as f64
    }

    /// Standard error of the mean.
    pub fn std_err(&self) -> f64 {
        let n = self.count as f64;
        let var = (self.sum_sq - self.sum * self.sum / n) / (n - 1.0);
        (var.max(0.0) / n).sqrt()
    }
}

/// Order-independent accumulator for the conditional drift statistics.
#[derive(Debug, Clone)]
pub struct DriftAccumulator {
    pub cutoff: f64,
    pub per_coord: Vec<CoordMoments>,
}

impl DriftAccumulator {
    pub fn new(m: usize, cutoff: f64) -> Self {
        Self {
            cutoff,
            per_coord: vec![CoordMoments::default(); m],
        }
    }

    fn observe(&mut self, z_prev: &[f64], y_prev: &[f64], y_next: &[f64]) {
        for i in 0..self.per_coord.len() {
            if z_prev[i].is_finite() && y_prev[i] <= -self.cutoff {
                let inc = y_next[i] - y_prev[i];
                let c = &mut self.per_coord[i];
                c.count += 1;
                c.sum += inc;
                c.sum_sq += inc * inc;
            }
        }
    }

    pub fn merge(&mut self, other: &DriftAccumulator) {
        for (a, b) in self.per_coord.iter_mut().zip(&other.per_coord) {
            a.count += b.count;
            a.sum += b.sum;
            a.sum_sq += b.sum_sq;
        }
    }
}

/// Streaming runner used by campaigns: no per-step storage, just the
/// summary, the drift moments, and an optional per-step sink
/// `(step, state, z)` for series dumps.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run_summarized(
    ensemble: &OperatorEnsemble,
    x0: &SimplexPoint,
    horizon: usize,
    mut rng: SplitMix64,
    seed_index: u64,
    criterion: &ConvergenceCriterion,
    epsilon: f64,
    block_len: usize,
    drift: &mut DriftAccumulator,
    mut series_sink: Option<&mut dyn FnMut(usize, &[f64], &[f64])>,
) -> Result<TrajectorySummary, DynamicsError> {
    check_run_inputs(ensemble, x0, horizon, criterion)?;
    let mut state = StepState::new(x0, drift.cutoff);
    let mut tracker = AbsorptionTracker::new(criterion);
    let mut hit: Option<usize> = None;

    tracker.observe(0, &state.x);
    if crate::simplex::in_neighborhood_raw(&state.x, epsilon).is_some() {
        hit = Some(0);
    }
    if let Some(sink) = series_sink.as_deref_mut() {
        sink(0, &state.x, &state.z);
    }

    let mut z_prev = state.z.clone();
    let mut y_prev = state.y.clone();
    for n in 1..=horizon {
        let op = ensemble.sample(&mut rng);
        state.advance(ensemble, op);
        drift.observe(&z_prev, &y_prev, &state.y);
        z_prev.copy_from_slice(&state.z);
        y_prev.copy_from_slice(&state.y);
        tracker.observe(n, &state.x);
        if hit.is_none()
            && n % block_len == 0
            && crate::simplex::in_neighborhood_raw(&state.x, epsilon).is_some()
        {
            hit = Some(n);
        }
        if let Some(sink) = series_sink.as_deref_mut() {
            sink(n, &state.x, &state.z);
        }
    }

    let (verdict_vertex, absorption_step) = match tracker.verdict() {
        Verdict::Converged { vertex, step } => (vertex + 1, step as i64),
        Verdict::Undecided => (0, -1),
    };
    let final_max_coord = state.x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(TrajectorySummary {
        seed_index,
        verdict_vertex,
        absorption_step,
        hit_u_eps_step: hit.map_or(-1, |h| h as i64),
        final_max_coord,
    })
}

/// First visit of the recorded orbit to `U_ε` along multiples of the block
/// length, with the vertex index under the smallest-index rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UEpsilonHit {
    pub step: usize,
    pub vertex: usize,
}

pub fn hitting_time_u_epsilon(
    record: &TrajectoryRecord,
    epsilon: f64,
    block_len: usize,
) -> Result<Option<UEpsilonHit>, DynamicsError> {
    if block_len == 0 {
        return Err(DynamicsError::BadBlock);
    }
    let mut step = 0;
    while step < record.states.len() {
        if let Some(vertex) = record.states[step].in_neighborhood(epsilon)? {
            return Ok(Some(UEpsilonHit { step, vertex }));
        }
        step += block_len;
    }
    Ok(None)
}

/// One attempt cycle of the stopping-time construction: the block-hitting
/// time `τ` into some `U_ε^J`, and the first later time `σ` at which a
/// non-leading restarted cut-off process climbs back above `−d` (`None`
/// when the attempt never fails within the horizon).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EscapeCycle {
    pub tau: usize,
    pub vertex: usize,
    pub sigma: Option<usize>,
}

/// Instrument the `(τ_k, J_k, σ_k)` cycles of a recorded orbit.
///
/// Each cycle restarts the cut-off processes of the non-leading
/// coordinates at `log ε` and watches for any of them to rise to `−d` or
/// above. Consecutive `τ` searches resume strictly after the previous
/// `σ`, on multiples of `block_len`.
pub fn stopping_time_trace(
    record: &TrajectoryRecord,
    epsilon: f64,
    block_len: usize,
    cutoff: f64,
) -> Result<Vec<EscapeCycle>, DynamicsError> {
    if block_len == 0 {
        return Err(DynamicsError::BadBlock);
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(DynamicsError::BadEpsilon(epsilon));
    }
    let m = record.x0.m();
    let horizon = record.horizon();
    let mut cycles = Vec::new();
    let mut from = 0usize;
    loop {
        let mut found = None;
        let mut t = from.div_ceil(block_len) * block_len;
        while t <= horizon {
            if let Some(vertex) = record.states[t].in_neighborhood(epsilon)? {
                found = Some((t, vertex));
                break;
            }
            t += block_len;
        }
        let Some((tau, vertex)) = found else { break };

        let mut y = vec![epsilon.ln(); m];
        let mut sigma = None;
        'watch: for t in (tau + 1)..=horizon {
            for i in 0..m {
                if i == vertex {
                    continue;
                }
                let dz = record.z[i][t] - record.z[i][t - 1];
                let inc = if dz >= -cutoff { dz } else { -cutoff };
                y[i] += inc;
            }
            for (i, &value) in y.iter().enumerate() {
                if i != vertex && value >= -cutoff {
                    sigma = Some(t);
                    break 'watch;
                }
            }
        }
        cycles.push(EscapeCycle { tau, vertex, sigma });
        match sigma {
            Some(s) => from = s + 1,
            None => break,
        }
    }
    Ok(cycles)
}
