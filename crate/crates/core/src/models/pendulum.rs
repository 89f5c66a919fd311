//! Linearized inverted pendulum on a cart with a band-limited force.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cones::AdmissibleSet;
use crate::error::{Error, Result};
use crate::models::zoh_discretize;
use crate::problem::{LinearDynamics, ProblemSpec, QuadraticCost, QuadraticTerminalCost};
use crate::spectrum::{build_band_constraint, BannedBinSet};

/// Cart-pendulum parameters. Lengths are in meters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PendulumParams {
    /// Cart mass (kg).
    pub cart_mass: f64,
    /// Pendulum mass (kg).
    pub pendulum_mass: f64,
    /// Pendulum half-length (m).
    pub half_length: f64,
    /// Half-range of the cart track (m).
    pub track_half_range: f64,
    pub gravity: f64,
    /// Pendulum inertia (kg m^2); `None` means `m l^2 / 3`.
    pub inertia: Option<f64>,
    /// Sample time (s).
    pub ts: f64,
    pub horizon: usize,
    /// Bounds on `|x_i|` for cart position, angle, cart velocity, angular velocity.
    pub state_bounds: [f64; 4],
    /// Bound on `|u|`.
    pub control_bound: f64,
    /// Zero-based banned DFT bins of the control, inclusive range.
    pub banned_lo: usize,
    pub banned_hi: usize,
    pub initial_state: [f64; 4],
    pub final_state: [f64; 4],
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            cart_mass: 2.5,
            pendulum_mass: 0.6,
            half_length: 0.25,
            track_half_range: 0.5,
            gravity: 9.8,
            inertia: None,
            ts: 0.1,
            horizon: 240,
            state_bounds: [0.2, 20.0 * PI / 180.0, 15.0, 30.0],
            control_bound: 5.0,
            banned_lo: 97,
            banned_hi: 143,
            initial_state: [0.0, 0.0, 0.0, 1.0],
            final_state: [0.0; 4],
        }
    }
}

impl PendulumParams {
    pub fn check(&self) -> Result<()> {
        let positive = [
            ("cart_mass", self.cart_mass),
            ("pendulum_mass", self.pendulum_mass),
            ("half_length", self.half_length),
            ("track_half_range", self.track_half_range),
            ("gravity", self.gravity),
            ("ts", self.ts),
            ("control_bound", self.control_bound),
            ("inertia", self.inertia()),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidProblem(format!(
                    "pendulum parameter {name} = {v} must be positive"
                )));
            }
        }
        if self.state_bounds.iter().any(|&b| b.is_nan() || b <= 0.0) {
            return Err(Error::InvalidProblem("state bounds must be positive".into()));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidProblem("horizon must be positive".into()));
        }
        if self.banned_lo > self.banned_hi || self.banned_hi >= self.horizon {
            return Err(Error::InvalidProblem(format!(
                "banned bin range {}..={} is not inside 0..{}",
                self.banned_lo, self.banned_hi, self.horizon
            )));
        }
        if self.reduced_mass() <= 0.0 {
            return Err(Error::InvalidProblem("effective mass term is not positive".into()));
        }
        Ok(())
    }

    pub fn inertia(&self) -> f64 {
        self.inertia
            .unwrap_or(self.pendulum_mass * self.half_length * self.half_length / 3.0)
    }

    /// `m + M - (m^2 l^2 / J + m l^2)`.
    fn reduced_mass(&self) -> f64 {
        let (m, l) = (self.pendulum_mass, self.half_length);
        m + self.cart_mass - (m * m * l * l / self.inertia() + m * l * l)
    }

    pub fn banned_bins(&self) -> BannedBinSet {
        BannedBinSet::uniform(self.horizon, 1, self.banned_lo..=self.banned_hi)
    }

    /// Continuous-time `(Ac, Bc)`.
    pub fn continuous_matrices(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let (m, l, g) = (self.pendulum_mass, self.half_length, self.gravity);
        let den = self.reduced_mass();
        let jml = self.inertia() + m * l * l;
        let mut ac = DMatrix::zeros(4, 4);
        ac[(0, 2)] = 1.0;
        ac[(1, 3)] = 1.0;
        ac[(2, 1)] = -(m * l).powi(2) * g / (jml * den);
        ac[(3, 1)] = m * g * l * (m + self.cart_mass) / (jml * den);
        let bc = DMatrix::from_column_slice(4, 1, &[0.0, 0.0, 1.0 / den, -m * l / (jml * den)]);
        (ac, bc)
    }

    pub fn discrete_matrices(&self) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let (ac, bc) = self.continuous_matrices();
        zoh_discretize(&ac, &bc, self.ts)
    }
}

/// Minimum-effort transfer `x_0 -> x_T` with box bounds and a banned control band.
pub fn pendulum_problem(p: &PendulumParams) -> Result<ProblemSpec> {
    pendulum_problem_with_band(p, true)
}

/// As [`pendulum_problem`], optionally leaving out the control band.
pub fn pendulum_problem_with_band(p: &PendulumParams, with_band: bool) -> Result<ProblemSpec> {
    p.check()?;
    let (a, b) = p.discrete_matrices()?;
    let mut spec = ProblemSpec::stationary(
        p.horizon,
        Arc::new(LinearDynamics::new(a, b)),
        Arc::new(QuadraticCost::diagonal(4, 1, 0.0, 1.0)),
        Arc::new(QuadraticTerminalCost::zero(4)),
    )
    .with_initial_state(DVector::from_column_slice(&p.initial_state))
    .with_terminal_state(DVector::from_column_slice(&p.final_state))
    .with_state_set(AdmissibleSet::symmetric_box(&p.state_bounds))
    .with_control_set(AdmissibleSet::symmetric_box(&[p.control_bound]));
    if with_band {
        spec = spec.with_control_freq(build_band_constraint(p.horizon, 1, &p.banned_bins())?);
    }
    Ok(spec)
}
