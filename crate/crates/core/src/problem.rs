//! Problem data: dynamics and cost oracles, admissible sets, frequency
//! constraints, rollout, and cost evaluation.
//!
//! A [`ProblemSpec`] describes
//!
//! ```text
//!   minimize    sum_{t<T} c_t(x_t, u_t) + c_T(x_T)
//!   subject to  x_{t+1} = f_t(x_t, u_t),   x_t in X_t,   u_t in U_t,
//!               F^x(x_0..x_T) = 0,         F^u(u_0..u_{T-1}) = 0.
//! ```
//!
//! Fixed endpoints are always stored as singleton `X_0` / `X_T` sets so the
//! normal-cone machinery treats them like any other admissible set.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::cones::AdmissibleSet;
use crate::error::{Error, Result};
use crate::linalg::all_finite;
use crate::spectrum::FrequencyConstraint;

/// Per-stage transition map `f_t` with one-sided directional derivatives.
///
/// Implementations must be safe for concurrent read-only use.
pub trait Dynamics: Send + Sync {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;

    fn eval(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>;

    /// One-sided directional derivative of `f(., u)` at `x` along `y`.
    fn ddx(&self, x: &DVector<f64>, u: &DVector<f64>, y: &DVector<f64>) -> DVector<f64>;

    /// One-sided directional derivative of `f(x, .)` at `u` along `w`.
    fn ddu(&self, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64>;

    /// Joint one-sided directional derivative along `(y, w)`.
    ///
    /// The default is `ddx + ddu`, which is exact whenever the kinks in `x`
    /// and `u` are separated. Maps whose kink set couples both arguments
    /// must override it.
    fn dd(&self, x: &DVector<f64>, u: &DVector<f64>, y: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        self.ddx(x, u, y) + self.ddu(x, u, w)
    }

    fn smooth_in_x(&self, x: &DVector<f64>, u: &DVector<f64>) -> bool;
    fn smooth_in_u(&self, x: &DVector<f64>, u: &DVector<f64>) -> bool;

    /// Jacobian in `x`; `Some` exactly when the map is smooth in `x` there.
    fn jac_x(&self, x: &DVector<f64>, u: &DVector<f64>) -> Option<DMatrix<f64>>;
    fn jac_u(&self, x: &DVector<f64>, u: &DVector<f64>) -> Option<DMatrix<f64>>;

    /// Jacobians of the designated branch at `(x, u)`.
    ///
    /// At smooth points these are the true Jacobians. At kinks each model
    /// picks one representative; solvers use it as a descent direction.
    fn branch_jacobians(&self, x: &DVector<f64>, u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>);

    /// Extra state directions worth probing at a kink (beyond axis and random samples).
    fn kink_directions_x(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> Vec<DVector<f64>> {
        Vec::new()
    }

    fn kink_directions_u(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> Vec<DVector<f64>> {
        Vec::new()
    }

    /// Affine representation `f(x, u) = A x + B u + c`, if the map is affine.
    fn as_affine(&self) -> Option<&LinearDynamics> {
        None
    }
}

/// Smooth stage cost `c_t(x, u)`.
pub trait StageCost: Send + Sync {
    fn value(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64;
    fn grad_x(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>;
    fn grad_u(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>;

    fn as_quadratic(&self) -> Option<&QuadraticCost> {
        None
    }
}

/// Terminal cost `c_T(x)`. Smooth by default; regular nonsmooth costs
/// override [`TerminalCost::dd`] and [`TerminalCost::is_smooth_at`].
pub trait TerminalCost: Send + Sync {
    fn value(&self, x: &DVector<f64>) -> f64;

    /// Gradient (or the designated element of the generalized gradient at kinks).
    fn grad(&self, x: &DVector<f64>) -> DVector<f64>;

    fn dd(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        self.grad(x).dot(y)
    }

    fn is_smooth_at(&self, _x: &DVector<f64>) -> bool {
        true
    }

    fn as_quadratic(&self) -> Option<&QuadraticTerminalCost> {
        None
    }
}

/// `x_{t+1} = A x_t + B u_t + c`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearDynamics {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DVector<f64>,
}

impl LinearDynamics {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Self {
        let n = a.nrows();
        Self {
            a,
            b,
            c: DVector::zeros(n),
        }
    }

    pub fn with_offset(mut self, c: DVector<f64>) -> Self {
        self.c = c;
        self
    }
}

impl Dynamics for LinearDynamics {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    fn control_dim(&self) -> usize {
        self.b.ncols()
    }

    fn eval(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u + &self.c
    }

    fn ddx(&self, _x: &DVector<f64>, _u: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        &self.a * y
    }

    fn ddu(&self, _x: &DVector<f64>, _u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        &self.b * w
    }

    fn smooth_in_x(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> bool {
        true
    }

    fn smooth_in_u(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> bool {
        true
    }

    fn jac_x(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(self.a.clone())
    }

    fn jac_u(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(self.b.clone())
    }

    fn branch_jacobians(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        (self.a.clone(), self.b.clone())
    }

    fn as_affine(&self) -> Option<&LinearDynamics> {
        Some(self)
    }
}

/// `c(x, u) = 1/2 x'Qx + 1/2 u'Ru + x'Nu + q'x + r'u`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticCost {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub n: DMatrix<f64>,
    pub q_lin: DVector<f64>,
    pub r_lin: DVector<f64>,
}

impl QuadraticCost {
    pub fn new(q: DMatrix<f64>, r: DMatrix<f64>) -> Self {
        let (nx, nu) = (q.nrows(), r.nrows());
        Self {
            q,
            r,
            n: DMatrix::zeros(nx, nu),
            q_lin: DVector::zeros(nx),
            r_lin: DVector::zeros(nu),
        }
    }

    /// `sum_i x_i^2 * wx + sum_j u_j^2 * wu`.
    pub fn diagonal(nx: usize, nu: usize, wx: f64, wu: f64) -> Self {
        Self::new(
            DMatrix::identity(nx, nx) * (2.0 * wx),
            DMatrix::identity(nu, nu) * (2.0 * wu),
        )
    }
}

impl StageCost for QuadraticCost {
    fn value(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x))
            + 0.5 * u.dot(&(&self.r * u))
            + x.dot(&(&self.n * u))
            + self.q_lin.dot(x)
            + self.r_lin.dot(u)
    }

    fn grad_x(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.q * x + &self.n * u + &self.q_lin
    }

    fn grad_u(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.r * u + self.n.transpose() * x + &self.r_lin
    }

    fn as_quadratic(&self) -> Option<&QuadraticCost> {
        Some(self)
    }
}

/// `c_T(x) = 1/2 x'Qx + q'x`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticTerminalCost {
    pub q: DMatrix<f64>,
    pub q_lin: DVector<f64>,
}

impl QuadraticTerminalCost {
    pub fn zero(n: usize) -> Self {
        Self {
            q: DMatrix::zeros(n, n),
            q_lin: DVector::zeros(n),
        }
    }

    pub fn new(q: DMatrix<f64>) -> Self {
        let n = q.nrows();
        Self {
            q,
            q_lin: DVector::zeros(n),
        }
    }
}

impl TerminalCost for QuadraticTerminalCost {
    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + self.q_lin.dot(x)
    }

    fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.q * x + &self.q_lin
    }

    fn as_quadratic(&self) -> Option<&QuadraticTerminalCost> {
        Some(self)
    }
}

/// Regular but nonsmooth terminal cost `weight * ||x - target||_1`.
#[derive(Clone, Debug, PartialEq)]
pub struct L1TerminalCost {
    pub weight: f64,
    pub target: DVector<f64>,
}

impl TerminalCost for L1TerminalCost {
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.weight * (x - &self.target).abs().sum()
    }

    fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        (x - &self.target).map(|d| {
            if d > 0.0 {
                self.weight
            } else if d < 0.0 {
                -self.weight
            } else {
                0.0
            }
        })
    }

    fn dd(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let d = x - &self.target;
        self.weight
            * d.iter()
                .zip(y.iter())
                .map(|(&di, &yi)| if di == 0.0 { yi.abs() } else { di.signum() * yi })
                .sum::<f64>()
    }

    fn is_smooth_at(&self, x: &DVector<f64>) -> bool {
        x.iter().zip(self.target.iter()).all(|(a, b)| a != b)
    }
}

/// States `x_0..x_T` and controls `u_0..u_{T-1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub controls: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.controls.len()
    }

    pub fn zeros(n: usize, m: usize, horizon: usize) -> Self {
        Self {
            states: vec![DVector::zeros(n); horizon + 1],
            controls: vec![DVector::zeros(m); horizon],
        }
    }
}

/// A full instance of the frequency-constrained optimal control problem.
#[derive(Clone)]
pub struct ProblemSpec {
    pub horizon: usize,
    pub state_dim: usize,
    pub control_dim: usize,
    pub dynamics: Vec<Arc<dyn Dynamics>>,
    pub stage_costs: Vec<Arc<dyn StageCost>>,
    pub terminal_cost: Arc<dyn TerminalCost>,
    /// `X_0 .. X_T` (length `T + 1`).
    pub state_sets: Vec<AdmissibleSet>,
    /// `U_0 .. U_{T-1}` (length `T`).
    pub control_sets: Vec<AdmissibleSet>,
    pub state_freq: Option<FrequencyConstraint>,
    pub control_freq: Option<FrequencyConstraint>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("horizon", &self.horizon)
            .field("state_dim", &self.state_dim)
            .field("control_dim", &self.control_dim)
            .field("state_sets", &self.state_sets)
            .field("control_sets", &self.control_sets)
            .field("state_freq", &self.state_freq.as_ref().map(|c| c.rows()))
            .field("control_freq", &self.control_freq.as_ref().map(|c| c.rows()))
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    /// Time-invariant problem with unconstrained states and controls.
    pub fn stationary(
        horizon: usize,
        dynamics: Arc<dyn Dynamics>,
        stage_cost: Arc<dyn StageCost>,
        terminal_cost: Arc<dyn TerminalCost>,
    ) -> Self {
        let n = dynamics.state_dim();
        let m = dynamics.control_dim();
        Self {
            horizon,
            state_dim: n,
            control_dim: m,
            dynamics: vec![dynamics; horizon],
            stage_costs: vec![stage_cost; horizon],
            terminal_cost,
            state_sets: vec![AdmissibleSet::Whole { dim: n }; horizon + 1],
            control_sets: vec![AdmissibleSet::Whole { dim: m }; horizon],
            state_freq: None,
            control_freq: None,
        }
    }

    pub fn with_initial_state(mut self, x0: DVector<f64>) -> Self {
        self.state_sets[0] = AdmissibleSet::Singleton { point: x0 };
        self
    }

    pub fn with_terminal_state(mut self, xf: DVector<f64>) -> Self {
        let t = self.horizon;
        self.state_sets[t] = AdmissibleSet::Singleton { point: xf };
        self
    }

    /// Apply `set` to every state stage that is not already a singleton.
    pub fn with_state_set(mut self, set: AdmissibleSet) -> Self {
        for s in self.state_sets.iter_mut() {
            if !matches!(s, AdmissibleSet::Singleton { .. }) {
                *s = set.clone();
            }
        }
        self
    }

    pub fn with_control_set(mut self, set: AdmissibleSet) -> Self {
        self.control_sets = vec![set; self.horizon];
        self
    }

    pub fn with_state_freq(mut self, fc: FrequencyConstraint) -> Self {
        self.state_freq = Some(fc);
        self
    }

    pub fn with_control_freq(mut self, fc: FrequencyConstraint) -> Self {
        self.control_freq = Some(fc);
        self
    }

    pub fn without_control_freq(mut self) -> Self {
        self.control_freq = None;
        self
    }

    pub fn initial_state(&self) -> Option<&DVector<f64>> {
        match self.state_sets.first() {
            Some(AdmissibleSet::Singleton { point }) => Some(point),
            _ => None,
        }
    }

    pub fn terminal_state(&self) -> Option<&DVector<f64>> {
        match self.state_sets.last() {
            Some(AdmissibleSet::Singleton { point }) => Some(point),
            _ => None,
        }
    }

    /// Dimension of the stacked decision vector, `n (T+1) + m T`.
    pub fn lifted_dim(&self) -> usize {
        self.state_dim * (self.horizon + 1) + self.control_dim * self.horizon
    }

    pub fn is_linear_quadratic(&self) -> bool {
        self.dynamics.iter().all(|d| d.as_affine().is_some())
            && self.stage_costs.iter().all(|c| c.as_quadratic().is_some())
            && self.terminal_cost.as_quadratic().is_some()
    }

    fn check_dims(&self, traj: &Trajectory) -> Result<()> {
        if traj.controls.len() != self.horizon {
            return Err(Error::dim("trajectory controls", self.horizon, traj.controls.len()));
        }
        if traj.states.len() != self.horizon + 1 {
            return Err(Error::dim("trajectory states", self.horizon + 1, traj.states.len()));
        }
        for x in &traj.states {
            if x.len() != self.state_dim {
                return Err(Error::dim("state vector", self.state_dim, x.len()));
            }
        }
        for u in &traj.controls {
            if u.len() != self.control_dim {
                return Err(Error::dim("control vector", self.control_dim, u.len()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IssueKind {
    Length,
    Dimension,
    FrequencyShape,
    InvalidSet,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Issue {
    pub kind: IssueKind,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }

    fn push(&mut self, kind: IssueKind, message: String) {
        self.issues.push(Issue { kind, message });
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            let msgs: Vec<_> = self.issues.iter().map(|i| i.message.as_str()).collect();
            Err(Error::InvalidProblem(msgs.join("; ")))
        }
    }
}

/// Check list lengths, oracle dimensions, set dimensions, and frequency-map shapes.
pub fn validate(spec: &ProblemSpec) -> ValidationReport {
    let mut rep = ValidationReport::default();
    let (t, n, m) = (spec.horizon, spec.state_dim, spec.control_dim);

    if t == 0 {
        rep.push(IssueKind::Length, "horizon must be positive".into());
    }
    if n == 0 || m == 0 {
        rep.push(
            IssueKind::Dimension,
            "state and control dimensions must be positive".into(),
        );
    }
    let lengths = [
        ("dynamics", spec.dynamics.len(), t),
        ("stage_costs", spec.stage_costs.len(), t),
        ("state_sets", spec.state_sets.len(), t + 1),
        ("control_sets", spec.control_sets.len(), t),
    ];
    for (name, got, want) in lengths {
        if got != want {
            rep.push(IssueKind::Length, format!("{name} has length {got}, expected {want}"));
        }
    }
    for (i, d) in spec.dynamics.iter().enumerate() {
        if d.state_dim() != n || d.control_dim() != m {
            rep.push(
                IssueKind::Dimension,
                format!(
                    "dynamics[{i}] maps R^{}xR^{}, expected R^{n}xR^{m}",
                    d.state_dim(),
                    d.control_dim()
                ),
            );
        }
    }
    for (i, s) in spec.state_sets.iter().enumerate() {
        if s.dim() != n {
            rep.push(
                IssueKind::Dimension,
                format!("state_sets[{i}] has dimension {}, expected {n}", s.dim()),
            );
        }
        if let Err(e) = s.check() {
            rep.push(IssueKind::InvalidSet, format!("state_sets[{i}]: {e}"));
        }
    }
    for (i, s) in spec.control_sets.iter().enumerate() {
        if s.dim() != m {
            rep.push(
                IssueKind::Dimension,
                format!("control_sets[{i}] has dimension {}, expected {m}", s.dim()),
            );
        }
        if let Err(e) = s.check() {
            rep.push(IssueKind::InvalidSet, format!("control_sets[{i}]: {e}"));
        }
    }
    if let Some(fc) = &spec.state_freq {
        check_freq(&mut rep, "state_freq", fc, t + 1, n);
    }
    if let Some(fc) = &spec.control_freq {
        check_freq(&mut rep, "control_freq", fc, t, m);
    }
    rep
}

fn check_freq(rep: &mut ValidationReport, name: &str, fc: &FrequencyConstraint, len: usize, dim: usize) {
    if fc.stage_maps.len() != len {
        rep.push(
            IssueKind::FrequencyShape,
            format!("{name} has {} stage maps, expected {len}", fc.stage_maps.len()),
        );
    }
    for (t, g) in fc.stage_maps.iter().enumerate() {
        if g.ncols() != dim {
            rep.push(
                IssueKind::FrequencyShape,
                format!("{name} stage map {t} has {} columns, expected {dim}", g.ncols()),
            );
        }
        if g.nrows() != fc.offset.len() {
            rep.push(
                IssueKind::FrequencyShape,
                format!(
                    "{name} stage map {t} has {} rows, expected {}",
                    g.nrows(),
                    fc.offset.len()
                ),
            );
        }
    }
}

/// Roll the dynamics forward from `x0` under `controls`.
pub fn simulate(spec: &ProblemSpec, x0: &DVector<f64>, controls: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    if x0.len() != spec.state_dim {
        return Err(Error::dim("initial state", spec.state_dim, x0.len()));
    }
    if controls.len() != spec.horizon {
        return Err(Error::dim("control sequence", spec.horizon, controls.len()));
    }
    let mut states = Vec::with_capacity(spec.horizon + 1);
    states.push(x0.clone());
    for (t, (f, u)) in spec.dynamics.iter().zip(controls).enumerate() {
        if u.len() != spec.control_dim {
            return Err(Error::dim(format!("control at stage {t}"), spec.control_dim, u.len()));
        }
        let next = f.eval(&states[t], u);
        if !all_finite(&next) {
            return Err(Error::NonFinite {
                stage: t,
                what: "dynamics output during rollout".into(),
            });
        }
        states.push(next);
    }
    Ok(states)
}

/// `sum_{t<T} c_t(x_t, u_t) + c_T(x_T)`.
pub fn total_cost(spec: &ProblemSpec, traj: &Trajectory) -> Result<f64> {
    spec.check_dims(traj)?;
    let mut acc = 0.0;
    for (t, c) in spec.stage_costs.iter().enumerate() {
        let v = c.value(&traj.states[t], &traj.controls[t]);
        if !v.is_finite() {
            return Err(Error::NonFinite {
                stage: t,
                what: "stage cost".into(),
            });
        }
        acc += v;
    }
    let vt = spec.terminal_cost.value(&traj.states[spec.horizon]);
    if !vt.is_finite() {
        return Err(Error::NonFinite {
            stage: spec.horizon,
            what: "terminal cost".into(),
        });
    }
    Ok(acc + vt)
}

/// Numeric one-sided directional derivative with one Richardson step.
///
/// Fallback only: accurate to roughly `1e-6` relative for maps that are
/// smooth along the ray `x + s y`, `s in (0, theta]`.
pub fn numeric_one_sided<F>(f: F, x: &DVector<f64>, y: &DVector<f64>, theta: f64) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let f0 = f(x);
    let d1 = (f(&(x + y * theta)) - &f0) / theta;
    let d2 = (f(&(x + y * (theta / 2.0))) - &f0) / (theta / 2.0);
    d2 * 2.0 - d1
}
