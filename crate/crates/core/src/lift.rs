//! The lifted static problem over the stacked vector
//! `z = (x_0, .., x_T, u_0, .., u_{T-1})`, its constraint maps, and the
//! directional derivative of its Lagrangian.
//!
//! Everything is evaluated stagewise; nothing of size `M x M` is formed.

use nalgebra::{DMatrix, DVector};

use crate::cones::{normal_cone, ACTIVITY_TOL};
use crate::error::{Error, Result};
use crate::problem::{total_cost, ProblemSpec, Trajectory};
use crate::spectrum::{constraint_residual, FrequencyConstraint};

/// Stacked decision vector with its dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedPoint {
    pub data: DVector<f64>,
    pub n: usize,
    pub m: usize,
    pub horizon: usize,
}

impl LiftedPoint {
    pub fn lift(states: &[DVector<f64>], controls: &[DVector<f64>]) -> Result<Self> {
        let horizon = controls.len();
        if states.len() != horizon + 1 {
            return Err(Error::dim("states to lift", horizon + 1, states.len()));
        }
        let n = states[0].len();
        let m = controls.first().map_or(0, |u| u.len());
        let mut data = DVector::zeros(n * (horizon + 1) + m * horizon);
        for (t, x) in states.iter().enumerate() {
            if x.len() != n {
                return Err(Error::dim(format!("state {t}"), n, x.len()));
            }
            data.rows_mut(t * n, n).copy_from(x);
        }
        let base = n * (horizon + 1);
        for (t, u) in controls.iter().enumerate() {
            if u.len() != m {
                return Err(Error::dim(format!("control {t}"), m, u.len()));
            }
            data.rows_mut(base + t * m, m).copy_from(u);
        }
        Ok(Self { data, n, m, horizon })
    }

    pub fn from_trajectory(traj: &Trajectory) -> Result<Self> {
        Self::lift(&traj.states, &traj.controls)
    }

    pub fn from_data(data: DVector<f64>, n: usize, m: usize, horizon: usize) -> Result<Self> {
        let want = n * (horizon + 1) + m * horizon;
        if data.len() != want {
            return Err(Error::dim("lifted vector", want, data.len()));
        }
        Ok(Self { data, n, m, horizon })
    }

    pub fn state_offset(&self, t: usize) -> usize {
        t * self.n
    }

    pub fn control_offset(&self, t: usize) -> usize {
        self.n * (self.horizon + 1) + t * self.m
    }

    pub fn state(&self, t: usize) -> DVector<f64> {
        self.data.rows(self.state_offset(t), self.n).into_owned()
    }

    pub fn control(&self, t: usize) -> DVector<f64> {
        self.data.rows(self.control_offset(t), self.m).into_owned()
    }

    pub fn unlift(&self) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let states = (0..=self.horizon).map(|t| self.state(t)).collect();
        let controls = (0..self.horizon).map(|t| self.control(t)).collect();
        (states, controls)
    }

    pub fn to_trajectory(&self) -> Trajectory {
        let (states, controls) = self.unlift();
        Trajectory { states, controls }
    }
}

/// Multiplier tuple `(nu, lambda, mu_S, mu_C, eta_x, eta_u)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Multipliers {
    pub nu: f64,
    /// `lambda_0 .. lambda_{T-1}`.
    pub lambda: Vec<DVector<f64>>,
    pub mu_s: DVector<f64>,
    pub mu_c: DVector<f64>,
    /// `eta_x_0 .. eta_x_T`.
    pub eta_x: Vec<DVector<f64>>,
    /// `eta_u_0 .. eta_u_{T-1}`.
    pub eta_u: Vec<DVector<f64>>,
}

impl Multipliers {
    pub fn zeros(spec: &ProblemSpec) -> Self {
        let (t, n, m) = (spec.horizon, spec.state_dim, spec.control_dim);
        Self {
            nu: 1.0,
            lambda: vec![DVector::zeros(n); t],
            mu_s: DVector::zeros(spec.state_freq.as_ref().map_or(0, |f| f.rows())),
            mu_c: DVector::zeros(spec.control_freq.as_ref().map_or(0, |f| f.rows())),
            eta_x: vec![DVector::zeros(n); t + 1],
            eta_u: vec![DVector::zeros(m); t],
        }
    }

    /// Largest absolute multiplier entry.
    pub fn max_abs(&self) -> f64 {
        let mut acc = self.nu.abs().max(self.mu_s.amax()).max(self.mu_c.amax());
        for v in self.lambda.iter().chain(&self.eta_x).chain(&self.eta_u) {
            acc = acc.max(v.amax());
        }
        acc
    }

    pub fn all_finite(&self) -> bool {
        self.nu.is_finite() && self.max_abs().is_finite()
    }

    pub fn check_dims(&self, spec: &ProblemSpec) -> Result<()> {
        let z = Self::zeros(spec);
        let pairs = [
            ("adjoint count", z.lambda.len(), self.lambda.len()),
            ("state-set multiplier count", z.eta_x.len(), self.eta_x.len()),
            ("control-set multiplier count", z.eta_u.len(), self.eta_u.len()),
            ("state-frequency multiplier", z.mu_s.len(), self.mu_s.len()),
            ("control-frequency multiplier", z.mu_c.len(), self.mu_c.len()),
        ];
        for (what, want, got) in pairs {
            if want != got {
                return Err(Error::dim(what, want, got));
            }
        }
        for v in self.lambda.iter().chain(&self.eta_x) {
            if v.len() != spec.state_dim {
                return Err(Error::dim("state multiplier", spec.state_dim, v.len()));
            }
        }
        for v in &self.eta_u {
            if v.len() != spec.control_dim {
                return Err(Error::dim("control multiplier", spec.control_dim, v.len()));
            }
        }
        Ok(())
    }
}

/// View of a [`ProblemSpec`] as a static problem in `z`.
#[derive(Clone, Copy, Debug)]
pub struct LiftedProblem<'a> {
    pub spec: &'a ProblemSpec,
}

impl<'a> LiftedProblem<'a> {
    pub fn new(spec: &'a ProblemSpec) -> Self {
        Self { spec }
    }

    pub fn dim(&self) -> usize {
        self.spec.lifted_dim()
    }

    fn check(&self, z: &LiftedPoint) -> Result<()> {
        let s = self.spec;
        if z.n != s.state_dim || z.m != s.control_dim || z.horizon != s.horizon {
            return Err(Error::InvalidProblem(format!(
                "lifted point has dims (n={}, m={}, T={}), problem has (n={}, m={}, T={})",
                z.n, z.m, z.horizon, s.state_dim, s.control_dim, s.horizon
            )));
        }
        Ok(())
    }

    /// `C(z)`.
    pub fn cost(&self, z: &LiftedPoint) -> Result<f64> {
        self.check(z)?;
        total_cost(self.spec, &z.to_trajectory())
    }

    /// Gradient of `C` (designated element at terminal-cost kinks).
    pub fn cost_gradient(&self, z: &LiftedPoint) -> Result<DVector<f64>> {
        self.check(z)?;
        let s = self.spec;
        let mut g = DVector::zeros(z.data.len());
        for t in 0..s.horizon {
            let (x, u) = (z.state(t), z.control(t));
            g.rows_mut(z.state_offset(t), z.n)
                .copy_from(&s.stage_costs[t].grad_x(&x, &u));
            g.rows_mut(z.control_offset(t), z.m)
                .copy_from(&s.stage_costs[t].grad_u(&x, &u));
        }
        let xt = z.state(s.horizon);
        g.rows_mut(z.state_offset(s.horizon), z.n)
            .copy_from(&s.terminal_cost.grad(&xt));
        Ok(g)
    }

    /// `D(z)`, stacked `x_{t+1} - f_t(x_t, u_t)`.
    pub fn dynamics_residual(&self, z: &LiftedPoint) -> Result<DVector<f64>> {
        self.check(z)?;
        let (n, horizon) = (z.n, z.horizon);
        let mut r = DVector::zeros(n * horizon);
        for t in 0..horizon {
            let f = self.spec.dynamics[t].eval(&z.state(t), &z.control(t));
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    stage: t,
                    what: "dynamics output in residual".into(),
                });
            }
            r.rows_mut(t * n, n).copy_from(&(z.state(t + 1) - f));
        }
        Ok(r)
    }

    /// `S(z)`; empty when there is no state-frequency constraint.
    pub fn state_freq_residual(&self, z: &LiftedPoint) -> Result<DVector<f64>> {
        self.check(z)?;
        match &self.spec.state_freq {
            Some(fc) => constraint_residual(fc, &z.unlift().0),
            None => Ok(DVector::zeros(0)),
        }
    }

    /// `U(z)`; empty when there is no control-frequency constraint.
    pub fn control_freq_residual(&self, z: &LiftedPoint) -> Result<DVector<f64>> {
        self.check(z)?;
        match &self.spec.control_freq {
            Some(fc) => constraint_residual(fc, &z.unlift().1),
            None => Ok(DVector::zeros(0)),
        }
    }

    /// Constant Jacobian of `S` as an `l_x x M` matrix.
    pub fn state_freq_jacobian(&self) -> DMatrix<f64> {
        self.freq_jacobian(self.spec.state_freq.as_ref(), true)
    }

    /// Constant Jacobian of `U` as an `l_u x M` matrix.
    pub fn control_freq_jacobian(&self) -> DMatrix<f64> {
        self.freq_jacobian(self.spec.control_freq.as_ref(), false)
    }

    fn freq_jacobian(&self, fc: Option<&FrequencyConstraint>, on_states: bool) -> DMatrix<f64> {
        let s = self.spec;
        let Some(fc) = fc else {
            return DMatrix::zeros(0, self.dim());
        };
        let mut j = DMatrix::zeros(fc.rows(), self.dim());
        let base = if on_states { 0 } else { s.state_dim * (s.horizon + 1) };
        let width = if on_states { s.state_dim } else { s.control_dim };
        for (t, g) in fc.stage_maps.iter().enumerate() {
            j.view_mut((0, base + t * width), (fc.rows(), width)).copy_from(g);
        }
        j
    }

    /// Normal-cone generators of the cylinder set `{z : x_t in X_t}`, embedded in `R^M`.
    pub fn lifted_state_normal(&self, t: usize, z: &LiftedPoint) -> Result<Vec<DVector<f64>>> {
        self.check(z)?;
        let cone = normal_cone(&self.spec.state_sets[t], &z.state(t))?;
        Ok(cone
            .generators
            .iter()
            .map(|g| {
                let mut e = DVector::zeros(z.data.len());
                e.rows_mut(z.state_offset(t), z.n).copy_from(g);
                e
            })
            .collect())
    }

    /// `L(z) = nu C + <Lambda, D> + <mu_S, S> + <mu_C, U>`.
    pub fn lagrangian(&self, z: &LiftedPoint, mult: &Multipliers) -> Result<f64> {
        mult.check_dims(self.spec)?;
        let d = self.dynamics_residual(z)?;
        let mut acc = mult.nu * self.cost(z)?;
        for (t, lam) in mult.lambda.iter().enumerate() {
            acc += lam.dot(&d.rows(t * z.n, z.n));
        }
        acc += mult.mu_s.dot(&self.state_freq_residual(z)?);
        acc += mult.mu_c.dot(&self.control_freq_residual(z)?);
        Ok(acc)
    }

    /// One-sided directional derivative of `L` at `z` along `dir`.
    ///
    /// The dynamics terms use the oracles' joint one-sided derivatives, so
    /// the result is exact at kinks as well.
    pub fn lagrangian_dirderiv(&self, z: &LiftedPoint, mult: &Multipliers, dir: &DVector<f64>) -> Result<f64> {
        self.check(z)?;
        mult.check_dims(self.spec)?;
        if dir.len() != z.data.len() {
            return Err(Error::dim("lagrangian direction", z.data.len(), dir.len()));
        }
        let s = self.spec;
        let v = LiftedPoint::from_data(dir.clone(), z.n, z.m, z.horizon)?;

        let mut acc = 0.0;
        for t in 0..s.horizon {
            let (x, u) = (z.state(t), z.control(t));
            let (y, w) = (v.state(t), v.control(t));
            let c = &s.stage_costs[t];
            acc += mult.nu * (c.grad_x(&x, &u).dot(&y) + c.grad_u(&x, &u).dot(&w));
            let df = s.dynamics[t].dd(&x, &u, &y, &w);
            acc += mult.lambda[t].dot(&(v.state(t + 1) - df));
        }
        acc += mult.nu * s.terminal_cost.dd(&z.state(s.horizon), &v.state(s.horizon));
        if s.state_freq.is_some() {
            acc += mult.mu_s.dot(&(self.state_freq_jacobian() * dir));
        }
        if s.control_freq.is_some() {
            acc += mult.mu_c.dot(&(self.control_freq_jacobian() * dir));
        }
        Ok(acc)
    }
}

/// Whether `z` satisfies every pointwise set membership, with the first offender.
pub fn first_set_violation(spec: &ProblemSpec, z: &LiftedPoint) -> Result<Option<(String, f64)>> {
    for t in 0..=spec.horizon {
        let d = spec.state_sets[t].distance(&z.state(t))?;
        if d > ACTIVITY_TOL {
            return Ok(Some((format!("X_{t}"), d)));
        }
    }
    for t in 0..spec.horizon {
        let d = spec.control_sets[t].distance(&z.control(t))?;
        if d > ACTIVITY_TOL {
            return Ok(Some((format!("U_{t}"), d)));
        }
    }
    Ok(None)
}
