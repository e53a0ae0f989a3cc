//! Random dynamics of Volterra quadratic stochastic operators on the
//! probability simplex.
//!
//! A quadratic stochastic operator maps a probability vector `x` over `m`
//! types to the next-generation frequencies `x'_k = Σ_{i,j} p_{ij,k} x_i x_j`.
//! The Volterra subclass (offspring copies a parent) is parameterized by a
//! skew-symmetric matrix `A` through `(Vx)_k = x_k (1 + Σ_i a_ki x_i)`.
//! This crate builds such operators, iterates i.i.d. random compositions of
//! them, and measures what the deterministic theory cannot deliver: almost
//! sure absorption at a vertex, the drift of the log-coordinate processes,
//! and the pullback attraction of the vertex set.
//!
//! Module map:
//!
//! * [`simplex`] — the state space `S^{m-1}`, vertices, ε-neighborhoods.
//! * [`volterra`] — operators in matrix and coefficient-tensor form,
//!   extremal enumeration, the vertex-squaring family.
//! * [`random_dynamics`] — the random iteration engine, log-processes,
//!   derived block constants, hitting/stopping instrumentation, and
//!   single-operator diagnostics.
//! * [`drift_analysis`] — synthetic drift processes and the certified
//!   series bounds controlling escape probabilities.
//! * [`attractor`] — two-sided environments, the cocycle, and pullback
//!   convergence to the vertex set.
//! * [`campaign`] — JSON-configured Monte Carlo campaigns with
//!   reproducible parallel execution and CSV/JSON exports.
//! * [`rng`] — the deterministic stream derivation everything draws from.
//! * [`stats`] — small estimation helpers (Wilson intervals, two-sample
//!   Kolmogorov–Smirnov, weighted fits).

#![forbid(unsafe_code)]

pub mod attractor;
pub mod campaign;
pub mod drift_analysis;
pub mod random_dynamics;
pub mod rng;
pub mod simplex;
pub mod stats;
pub mod volterra;

pub use random_dynamics::{derive_constants, DriftConstants, OperatorEnsemble};
pub use simplex::SimplexPoint;
pub use volterra::VolterraOperator;
