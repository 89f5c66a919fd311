//! Solve-then-filter baseline: drop the frequency constraint, solve, remove
//! the banned band from the control, and roll the filtered control out again.

use nalgebra::DVector;
use serde::Serialize;

use crate::cones::AdmissibleSet;
use crate::error::{Error, Result};
use crate::problem::{simulate, ProblemSpec, Trajectory};
use crate::solver::{solve, SolverOptions};
use crate::spectrum::{ideal_filter, BannedBinSet};

/// Constraint report for one trajectory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryReport {
    pub max_abs_control: f64,
    /// Largest distance of any control from its admissible set.
    pub control_set_violation: f64,
    /// Largest distance of any interior state from its admissible set.
    pub state_set_violation: f64,
    /// Smallest signed margin of any interior state to its set: the box
    /// margin `min(hi - x, x - lo)` for boxes, minus the distance otherwise.
    pub worst_state_slack: f64,
    /// `|x_T - x_f|` when a terminal state is fixed, else 0.
    pub terminal_miss: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterReport {
    pub unfiltered: Trajectory,
    pub filtered: Trajectory,
    pub unfiltered_report: TrajectoryReport,
    pub filtered_report: TrajectoryReport,
}

/// Report how `traj` sits against the sets of `spec`.
pub fn trajectory_report(spec: &ProblemSpec, traj: &Trajectory) -> Result<TrajectoryReport> {
    let mut control_set_violation = 0.0f64;
    let mut max_abs_control = 0.0f64;
    for (u, set) in traj.controls.iter().zip(&spec.control_sets) {
        max_abs_control = max_abs_control.max(u.amax());
        control_set_violation = control_set_violation.max(set.distance(u)?);
    }
    let mut state_set_violation = 0.0f64;
    let mut worst_state_slack = f64::INFINITY;
    for t in 1..spec.horizon {
        let (set, x) = (&spec.state_sets[t], &traj.states[t]);
        let dist = set.distance(x)?;
        state_set_violation = state_set_violation.max(dist);
        let slack = match set {
            AdmissibleSet::Box { lo, hi } => (0..x.len())
                .map(|i| (hi[i] - x[i]).min(x[i] - lo[i]))
                .fold(f64::INFINITY, f64::min),
            _ => 0.0 - dist,
        };
        worst_state_slack = worst_state_slack.min(slack);
    }
    let terminal_miss = match &spec.state_sets[spec.horizon] {
        AdmissibleSet::Singleton { point } => (&traj.states[spec.horizon] - point).norm(),
        _ => 0.0,
    };
    Ok(TrajectoryReport {
        max_abs_control,
        control_set_violation,
        state_set_violation,
        worst_state_slack,
        terminal_miss,
    })
}

/// Solve without frequency constraints, filter the control, and re-simulate.
pub fn filter_baseline(spec: &ProblemSpec, banned: &BannedBinSet, opts: &SolverOptions) -> Result<FilterReport> {
    let plain = spec.clone().without_control_freq();
    let x0 = plain
        .initial_state()
        .cloned()
        .ok_or_else(|| Error::InvalidProblem("filter baseline needs a fixed initial state".into()))?;
    let sol = solve(&plain, opts)?;
    let filtered_u: Vec<DVector<f64>> = ideal_filter(&sol.trajectory.controls, banned)?;
    let states = simulate(&plain, &x0, &filtered_u)?;
    let filtered = Trajectory {
        states,
        controls: filtered_u,
    };
    Ok(FilterReport {
        unfiltered_report: trajectory_report(&plain, &sol.trajectory)?,
        filtered_report: trajectory_report(&plain, &filtered)?,
        unfiltered: sol.trajectory,
        filtered,
    })
}
