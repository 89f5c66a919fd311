//! Buck converter in the compact two-branch form.
//!
//! State `i` (inductor current), control `V` (input voltage). The affine
//! branch `alpha i + beta V` holds for `i <= i_b(V)`; above the borderline the
//! map is `(delta V - gamma i) / (V - v)`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cones::ACTIVITY_TOL;
use crate::error::{Error, Result};
use crate::problem::{Dynamics, ProblemSpec, QuadraticCost, QuadraticTerminalCost};

/// Physical parameters. Derived constants are always recomputed from these.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuckParams {
    /// Load resistance (ohm).
    pub r: f64,
    /// Inductance (H).
    pub l: f64,
    /// Diode resistance (ohm).
    pub r_d: f64,
    /// Clock period (s).
    pub t_clk: f64,
    /// Reference current (A).
    pub i_ref: f64,
}

impl Default for BuckParams {
    fn default() -> Self {
        Self {
            r: 10.0,
            l: 0.05,
            r_d: 0.0,
            t_clk: 1e-3,
            i_ref: 1.0,
        }
    }
}

impl BuckParams {
    pub fn check(&self) -> Result<()> {
        let positive = [
            ("r", self.r),
            ("l", self.l),
            ("t_clk", self.t_clk),
            ("i_ref", self.i_ref),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidProblem(format!(
                    "buck parameter {name} = {v} must be positive"
                )));
            }
        }
        if !(self.r_d >= 0.0 && self.r_d.is_finite()) {
            return Err(Error::InvalidProblem(format!(
                "diode resistance {} must be nonnegative",
                self.r_d
            )));
        }
        let a = self.alpha();
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::InvalidProblem(format!("alpha = {a} must lie in (0, 1)")));
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        (-self.r * self.t_clk / self.l).exp()
    }

    pub fn beta(&self) -> f64 {
        (1.0 - self.alpha()) / self.r
    }

    fn decay(&self) -> f64 {
        (-(self.r + self.r_d) * self.t_clk / self.l).exp()
    }

    pub fn gamma(&self) -> f64 {
        self.r * self.i_ref * self.decay()
    }

    pub fn delta(&self) -> f64 {
        self.i_ref * self.decay()
    }

    /// Reference voltage `i_ref R`.
    pub fn v_ref(&self) -> f64 {
        self.i_ref * self.r
    }

    fn growth(&self) -> f64 {
        (self.r * self.t_clk / self.l).exp()
    }

    /// Borderline current at input voltage `v`.
    pub fn i_b(&self, v: f64) -> f64 {
        (self.i_ref - v / self.r) * self.growth() + v / self.r
    }

    /// Derivative of the borderline current in `v` (negative).
    pub fn i_b_slope(&self) -> f64 {
        (1.0 - self.growth()) / self.r
    }

    /// Borderline voltage at current `i`, the inverse of [`BuckParams::i_b`].
    pub fn v_b(&self, i: f64) -> f64 {
        self.r / (1.0 - self.growth()) * (i - self.i_ref * self.growth())
    }

    pub fn affine_branch(&self, i: f64, v: f64) -> f64 {
        self.alpha() * i + self.beta() * v
    }

    pub fn second_branch(&self, i: f64, v: f64) -> f64 {
        (self.delta() * v - self.gamma() * i) / (v - self.v_ref())
    }

    /// `(d/di, d/dV)` of the second branch.
    pub fn second_branch_gradient(&self, i: f64, v: f64) -> (f64, f64) {
        let d = v - self.v_ref();
        (
            -self.gamma() / d,
            (self.gamma() * i - self.delta() * self.v_ref()) / (d * d),
        )
    }

    /// Largest branch mismatch on the borderline over `points` voltages in `[v_lo, v_hi]`.
    pub fn borderline_mismatch(&self, v_lo: f64, v_hi: f64, points: usize) -> f64 {
        (0..points)
            .map(|k| {
                let v = if points > 1 {
                    v_lo + (v_hi - v_lo) * k as f64 / (points - 1) as f64
                } else {
                    v_lo
                };
                let i = self.i_b(v);
                (self.affine_branch(i, v) - self.second_branch(i, v)).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Compact buck dynamics as a [`Dynamics`] oracle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BuckDynamics {
    pub params: BuckParams,
}

impl BuckDynamics {
    /// Signed distance-like gap `i - i_b(V)`; nonpositive on the affine side.
    pub fn gap(&self, i: f64, v: f64) -> f64 {
        i - self.params.i_b(v)
    }

    /// Whether `(i, V)` lies on the borderline, up to the activity threshold.
    pub fn on_borderline(&self, i: f64, v: f64) -> bool {
        self.gap(i, v).abs() <= ACTIVITY_TOL * (1.0 + i.abs())
    }

    fn branch_gradient(&self, affine: bool, i: f64, v: f64) -> (f64, f64) {
        if affine {
            (self.params.alpha(), self.params.beta())
        } else {
            self.params.second_branch_gradient(i, v)
        }
    }

    /// Branch selected when leaving `(i, V)` along `(y, w)`.
    fn side(&self, i: f64, v: f64, y: f64, w: f64) -> bool {
        if self.on_borderline(i, v) {
            y - self.params.i_b_slope() * w <= 0.0
        } else {
            self.gap(i, v) <= 0.0
        }
    }
}

impl Dynamics for BuckDynamics {
    fn state_dim(&self) -> usize {
        1
    }

    fn control_dim(&self) -> usize {
        1
    }

    fn eval(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let (i, v) = (x[0], u[0]);
        let next = if self.gap(i, v) <= 0.0 {
            self.params.affine_branch(i, v)
        } else {
            self.params.second_branch(i, v)
        };
        DVector::from_element(1, next)
    }

    fn ddx(&self, x: &DVector<f64>, u: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let (i, v) = (x[0], u[0]);
        let (gi, _) = self.branch_gradient(self.side(i, v, y[0], 0.0), i, v);
        DVector::from_element(1, gi * y[0])
    }

    fn ddu(&self, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let (i, v) = (x[0], u[0]);
        let (_, gv) = self.branch_gradient(self.side(i, v, 0.0, w[0]), i, v);
        DVector::from_element(1, gv * w[0])
    }

    fn dd(&self, x: &DVector<f64>, u: &DVector<f64>, y: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let (i, v) = (x[0], u[0]);
        let (gi, gv) = self.branch_gradient(self.side(i, v, y[0], w[0]), i, v);
        DVector::from_element(1, gi * y[0] + gv * w[0])
    }

    fn smooth_in_x(&self, x: &DVector<f64>, u: &DVector<f64>) -> bool {
        !self.on_borderline(x[0], u[0])
    }

    fn smooth_in_u(&self, x: &DVector<f64>, u: &DVector<f64>) -> bool {
        !self.on_borderline(x[0], u[0])
    }

    fn jac_x(&self, x: &DVector<f64>, u: &DVector<f64>) -> Option<DMatrix<f64>> {
        self.smooth_in_x(x, u).then(|| self.branch_jacobians(x, u).0)
    }

    fn jac_u(&self, x: &DVector<f64>, u: &DVector<f64>) -> Option<DMatrix<f64>> {
        self.smooth_in_u(x, u).then(|| self.branch_jacobians(x, u).1)
    }

    /// The affine branch is designated on the borderline itself.
    fn branch_jacobians(&self, x: &DVector<f64>, u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let (i, v) = (x[0], u[0]);
        let affine = self.on_borderline(i, v) || self.gap(i, v) <= 0.0;
        let (gi, gv) = self.branch_gradient(affine, i, v);
        (DMatrix::from_element(1, 1, gi), DMatrix::from_element(1, 1, gv))
    }

    fn kink_directions_x(&self, x: &DVector<f64>, u: &DVector<f64>) -> Vec<DVector<f64>> {
        if self.on_borderline(x[0], u[0]) {
            vec![DVector::from_element(1, 1.0), DVector::from_element(1, -1.0)]
        } else {
            Vec::new()
        }
    }

    fn kink_directions_u(&self, x: &DVector<f64>, u: &DVector<f64>) -> Vec<DVector<f64>> {
        self.kink_directions_x(x, u)
    }
}

/// Transfer `i_0 = i_init` to `i_T = i_final` minimizing `sum_{t<T} i_t^2 + V_t^2`.
///
/// Fails with a model-consistency error if the two branches disagree on the
/// borderline by more than `1e-9` (this happens whenever `r_d > 0`).
pub fn buck_problem(p: BuckParams, i_init: f64, i_final: f64, horizon: usize) -> Result<ProblemSpec> {
    p.check()?;
    // stay clear of V = v, where the second branch is 0/0 on the borderline
    let v0 = p.v_ref();
    let mismatch = p.borderline_mismatch(1.5 * v0, 10.0 * v0, 100);
    if mismatch > 1e-9 {
        return Err(Error::ModelConsistency(format!(
            "branches differ by {mismatch:.3e} on the borderline; the compact form is continuous only for r_d = 0"
        )));
    }
    Ok(ProblemSpec::stationary(
        horizon,
        Arc::new(BuckDynamics { params: p }),
        Arc::new(QuadraticCost::diagonal(1, 1, 1.0, 1.0)),
        Arc::new(QuadraticTerminalCost::zero(1)),
    )
    .with_initial_state(DVector::from_element(1, i_init))
    .with_terminal_state(DVector::from_element(1, i_final)))
}

/// Interval `lambda_t * [min, max]{1, -v / (V - v)}` that must contain
/// `(lambda_{t-1} + eta_t + 2 nu i) / alpha` at a borderline stage.
pub fn borderline_adjoint_interval(p: &BuckParams, v: f64, lambda_t: f64) -> (f64, f64) {
    let a = lambda_t;
    let b = -p.v_ref() * lambda_t / (v - p.v_ref());
    (a.min(b), a.max(b))
}

/// Interval `lambda_t * [min, max]{beta, d/dV of the second branch}` that must contain `2 nu V`.
pub fn borderline_hmax_interval(p: &BuckParams, i: f64, v: f64, lambda_t: f64) -> (f64, f64) {
    let a = p.beta() * lambda_t;
    let b = p.second_branch_gradient(i, v).1 * lambda_t;
    (a.min(b), a.max(b))
}
