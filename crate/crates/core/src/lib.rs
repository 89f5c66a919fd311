//! Frequency-constrained discrete-time optimal control.
//!
//! The crate assembles optimal control problems whose trajectories carry
//! pointwise state/control constraints, equality constraints on selected DFT
//! bins of the state and control sequences, and dynamics that may only be
//! piecewise smooth. It synthesizes candidate optima and, more importantly,
//! certifies them against the discrete-time maximum principle: every
//! condition (nonnegativity, nontriviality, adjoint inclusion,
//! transversality, Hamiltonian maximization and the two frequency
//! constraints) is evaluated as an explicit residual.
//!
//! Module map:
//!
//! * [`problem`]: problem data, oracles, rollout and cost.
//! * [`spectrum`]: DFT matrices, band constraints, ideal filtering.
//! * [`cones`]: admissible sets with Clarke tangent/normal cones.
//! * [`lift`]: the stacked decision vector and the lifted maps built on it.
//! * [`solver`]: active-set LQ solver and augmented-Lagrangian solver.
//! * [`certificate`]: maximum-principle residual checks.
//! * [`models`]: inverted pendulum, a nonsmooth planar system, and a buck converter.

pub mod certificate;
pub mod cones;
pub mod error;
pub mod lift;
pub mod linalg;
pub mod models;
pub mod problem;
pub mod solver;
pub mod spectrum;

pub use error::{Error, Result};
pub use problem::{ProblemSpec, Trajectory};
