//! Solvers that synthesize candidate optima together with their multipliers.
//!
//! * [`solve_lq`]: exact active-set method for affine dynamics, convex
//!   quadratic costs and box/singleton sets.
//! * [`solve_general`]: augmented Lagrangian on the dynamics and frequency
//!   constraints with projected-gradient inner iterations.
//!
//! Both return normal multipliers (`nu = 1`).

mod general;
mod lq;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lift::Multipliers;
use crate::problem::{ProblemSpec, Trajectory};

pub use general::solve_general;
pub use lq::solve_lq;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
    pub penalty_init: f64,
    pub penalty_growth: f64,
    /// The penalty grows when the violation fails to shrink by this factor.
    pub violation_shrink: f64,
    pub equality_tol: f64,
    pub stationarity_tol: f64,
    pub activity_tol: f64,
    pub armijo_factor: f64,
    pub armijo_slope: f64,
    /// Iteration cap of the active-set method.
    pub max_active_set_iters: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_outer_iters: 100,
            max_inner_iters: 5000,
            penalty_init: 10.0,
            penalty_growth: 10.0,
            violation_shrink: 0.25,
            equality_tol: 1e-8,
            stationarity_tol: 1e-6,
            activity_tol: 1e-9,
            armijo_factor: 0.5,
            armijo_slope: 1e-4,
            max_active_set_iters: 10_000,
            seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn check(&self) -> Result<()> {
        let positive = [
            ("penalty_init", self.penalty_init),
            ("equality_tol", self.equality_tol),
            ("stationarity_tol", self.stationarity_tol),
            ("activity_tol", self.activity_tol),
            ("armijo_slope", self.armijo_slope),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidProblem(format!(
                    "solver option {name} = {v} must be positive"
                )));
            }
        }
        if self.penalty_growth.is_nan() || self.penalty_growth <= 1.0 {
            return Err(Error::InvalidProblem("penalty_growth must exceed 1".into()));
        }
        if !(self.armijo_factor > 0.0 && self.armijo_factor < 1.0) {
            return Err(Error::InvalidProblem("armijo_factor must lie in (0, 1)".into()));
        }
        if !(self.violation_shrink > 0.0 && self.violation_shrink < 1.0) {
            return Err(Error::InvalidProblem("violation_shrink must lie in (0, 1)".into()));
        }
        if self.max_outer_iters == 0 || self.max_inner_iters == 0 || self.max_active_set_iters == 0 {
            return Err(Error::InvalidProblem("iteration caps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub method: String,
    /// Active-set changes or total inner iterations.
    pub iterations: usize,
    pub outer_iterations: usize,
    /// Final `|(D, S, U)|_inf`.
    pub constraint_violation: f64,
    /// Final infinity norm of the lifted stationarity residual.
    pub stationarity: f64,
    pub active_bounds: usize,
    /// Constraint violation after each outer iteration.
    pub violation_history: Vec<f64>,
    pub final_penalty: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub trajectory: Trajectory,
    pub multipliers: Multipliers,
    pub objective: f64,
    pub diagnostics: Diagnostics,
}

/// Dispatch to [`solve_lq`] when the problem qualifies, else [`solve_general`].
pub fn solve(spec: &ProblemSpec, opts: &SolverOptions) -> Result<Solution> {
    if lq::qualifies(spec) {
        solve_lq(spec, opts)
    } else {
        solve_general(spec, opts)
    }
}

/// Backward adjoint recursion for dynamics that are smooth in the state.
///
/// Starts from `lambda_{T-1} = -nu grad c_T - G_T' mu_S - eta_T` and runs
/// `lambda_{t-1} = A_t' lambda_t - nu grad_x c_t - G_t' mu_S - eta_t` down to `t = 1`.
pub fn adjoint_recursion_smooth(spec: &ProblemSpec, sol: &Solution) -> Result<Vec<DVector<f64>>> {
    let mult = &sol.multipliers;
    mult.check_dims(spec)?;
    let traj = &sol.trajectory;
    let horizon = spec.horizon;
    let freq_term = |t: usize| -> DVector<f64> {
        match &spec.state_freq {
            Some(fc) => fc.stage_maps[t].transpose() * &mult.mu_s,
            None => DVector::zeros(spec.state_dim),
        }
    };

    let mut lambda = vec![DVector::zeros(spec.state_dim); horizon];
    let xt = &traj.states[horizon];
    lambda[horizon - 1] = -spec.terminal_cost.grad(xt) * mult.nu - freq_term(horizon) - &mult.eta_x[horizon];
    for t in (1..horizon).rev() {
        let (x, u) = (&traj.states[t], &traj.controls[t]);
        let jx = spec.dynamics[t].jac_x(x, u).ok_or_else(|| Error::Precondition {
            stage: t,
            what: "dynamics are not smooth in the state here; use the certificate inclusion test".into(),
        })?;
        lambda[t - 1] =
            jx.transpose() * &lambda[t] - spec.stage_costs[t].grad_x(x, u) * mult.nu - freq_term(t) - &mult.eta_x[t];
    }
    Ok(lambda)
}
