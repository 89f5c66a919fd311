//! Certificates for candidate optima: residuals of the necessary conditions
//! for a trajectory together with a multiplier tuple.
//!
//! Conditions, by record name:
//!
//! * `C-i` `nu` is 0 or 1.
//! * `C-ii` the multipliers do not all vanish.
//! * `C-iii.state` `x_{t+1} = f_t(x_t, u_t)`.
//! * `C-iii.adjoint` `<lambda_{t-1}, y> >= dH_x(y) - <eta_t, y>` for `t = 1..T-1`.
//! * `C-iv.initial`, `C-iv.terminal` endpoint transversality.
//! * `C-v` `dH_u(w) <= 0` for tangent directions `w` of `U_t`.
//! * `C-vi`, `C-vii` state and control frequency residuals.
//!
//! Smooth stages are checked in equality form; nonsmooth stages are probed
//! with signed axis directions, oracle kink directions and seeded random
//! unit directions. Residuals are relative: the raw violation divided by
//! `max(1, largest term)`.

use std::fmt::Write as _;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cones::{normal_cone, tangent_contains, AdmissibleSet};
use crate::error::{Error, Result};
use crate::lift::Multipliers;
use crate::linalg::random_unit;
use crate::problem::ProblemSpec;
use crate::solver::Solution;
use crate::spectrum::constraint_residual;

/// How the terminal condition is tested.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminalVariant {
    /// Equality form where the terminal cost is smooth, sampled form elsewhere.
    #[default]
    Auto,
    SmoothCost,
    RegularCost,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertificateOptions {
    /// Random directions per nonsmooth stage, on top of axis and kink directions.
    pub n_dirs: usize,
    pub seed: u64,
    /// Tolerance for the state equation and frequency residuals.
    pub equality_tol: f64,
    /// Tolerance for adjoint, transversality, H-max and normal-cone membership.
    pub inequality_tol: f64,
    pub nontriviality_floor: f64,
    pub terminal_variant: TerminalVariant,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        Self {
            n_dirs: 1000,
            seed: 0,
            equality_tol: 1e-8,
            inequality_tol: 1e-6,
            nontriviality_floor: 1e-12,
            terminal_variant: TerminalVariant::Auto,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionRecord {
    pub name: String,
    pub passed: bool,
    pub residual: f64,
    pub tolerance: f64,
    /// Stage of the worst violation.
    pub stage: Option<usize>,
    /// Direction of the worst violation for sampled checks.
    pub direction: Option<Vec<f64>>,
    pub samples: usize,
    pub note: String,
}

impl ConditionRecord {
    fn new(name: &str, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed: true,
            residual: 0.0,
            tolerance,
            stage: None,
            direction: None,
            samples: 0,
            note: String::new(),
        }
    }

    /// Keep the larger of the current and the offered violation.
    fn offer(&mut self, residual: f64, stage: Option<usize>, direction: Option<&DVector<f64>>) {
        if residual > self.residual || residual.is_nan() && !self.residual.is_nan() {
            self.residual = residual;
            self.stage = stage;
            self.direction = direction.map(|d| d.iter().copied().collect());
        }
    }

    fn add_note(&mut self, note: impl AsRef<str>) {
        if !self.note.is_empty() {
            self.note.push_str("; ");
        }
        self.note.push_str(note.as_ref());
    }

    fn finish(mut self) -> Self {
        self.passed = self.residual <= self.tolerance;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateReport {
    pub passed: bool,
    pub seed: u64,
    pub n_dirs: usize,
    pub records: Vec<ConditionRecord>,
}

impl CertificateReport {
    pub fn record(&self, name: &str) -> Option<&ConditionRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConditionRecord> {
        self.records.iter().filter(|r| !r.passed)
    }

    /// Key-value text with one section per condition.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[certificate]");
        let _ = writeln!(s, "passed = {}", self.passed);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "n_dirs = {}", self.n_dirs);
        for r in &self.records {
            let _ = writeln!(s, "\n[{}]", r.name);
            let _ = writeln!(s, "passed = {}", r.passed);
            let _ = writeln!(s, "residual = {:.16e}", r.residual);
            let _ = writeln!(s, "tolerance = {:.16e}", r.tolerance);
            let stage = r.stage.map_or_else(|| "-".to_string(), |t| t.to_string());
            let _ = writeln!(s, "stage = {stage}");
            let direction = r.direction.as_ref().map_or_else(
                || "-".to_string(),
                |d| d.iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(","),
            );
            let _ = writeln!(s, "direction = {direction}");
            let _ = writeln!(s, "samples = {}", r.samples);
            let _ = writeln!(s, "note = {}", r.note.replace('\n', " "));
        }
        s
    }

    /// Inverse of [`CertificateReport::to_text`].
    pub fn from_text(text: &str) -> Result<Self> {
        let parse_err = |line: usize, msg: String| Error::Parse { line, msg };
        let mut report = CertificateReport {
            passed: false,
            seed: 0,
            n_dirs: 0,
            records: Vec::new(),
        };
        let mut in_header = false;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                in_header = name == "certificate";
                if !in_header {
                    report.records.push(ConditionRecord::new(name, 0.0));
                }
                continue;
            }
            let (key, value) = line
                .split_once(" = ")
                .or_else(|| line.split_once('=').map(|(k, v)| (k.trim_end(), v.trim_start())))
                .ok_or_else(|| parse_err(line_no, format!("expected key = value, got {line:?}")))?;
            let bool_of = |v: &str| v.parse::<bool>().map_err(|e| parse_err(line_no, e.to_string()));
            let f64_of = |v: &str| v.parse::<f64>().map_err(|e| parse_err(line_no, e.to_string()));
            let usize_of = |v: &str| v.parse::<usize>().map_err(|e| parse_err(line_no, e.to_string()));
            if in_header {
                match key {
                    "passed" => report.passed = bool_of(value)?,
                    "seed" => {
                        report.seed = value
                            .parse()
                            .map_err(|e: std::num::ParseIntError| parse_err(line_no, e.to_string()))?
                    }
                    "n_dirs" => report.n_dirs = usize_of(value)?,
                    _ => return Err(parse_err(line_no, format!("unknown key {key:?}"))),
                }
                continue;
            }
            let rec = report
                .records
                .last_mut()
                .ok_or_else(|| parse_err(line_no, "key outside any section".into()))?;
            match key {
                "passed" => rec.passed = bool_of(value)?,
                "residual" => rec.residual = f64_of(value)?,
                "tolerance" => rec.tolerance = f64_of(value)?,
                "stage" => rec.stage = if value == "-" { None } else { Some(usize_of(value)?) },
                "direction" => {
                    rec.direction = if value == "-" {
                        None
                    } else {
                        Some(value.split(',').map(f64_of).collect::<Result<_>>()?)
                    }
                }
                "samples" => rec.samples = usize_of(value)?,
                "note" => rec.note = value.to_string(),
                _ => return Err(parse_err(line_no, format!("unknown key {key:?}"))),
            }
        }
        Ok(report)
    }
}

/// The Hamiltonian `H(lambda, t, x, u) = <lambda, f_t> - nu c_t - <mu_S, G^x_t x> - <mu_C, G^u_t u>`.
pub struct HamiltonianEvaluator<'a> {
    spec: &'a ProblemSpec,
    nu: f64,
    mu_s: &'a DVector<f64>,
    mu_c: &'a DVector<f64>,
}

impl<'a> HamiltonianEvaluator<'a> {
    pub fn new(spec: &'a ProblemSpec, mult: &'a Multipliers) -> Self {
        Self {
            spec,
            nu: mult.nu,
            mu_s: &mult.mu_s,
            mu_c: &mult.mu_c,
        }
    }

    /// `(G^x_t)' mu_S`, also defined at `t = T`.
    pub fn state_freq_term(&self, t: usize) -> DVector<f64> {
        match &self.spec.state_freq {
            Some(fc) => fc.stage_maps[t].transpose() * self.mu_s,
            None => DVector::zeros(self.spec.state_dim),
        }
    }

    /// `(G^u_t)' mu_C`.
    pub fn control_freq_term(&self, t: usize) -> DVector<f64> {
        match &self.spec.control_freq {
            Some(fc) => fc.stage_maps[t].transpose() * self.mu_c,
            None => DVector::zeros(self.spec.control_dim),
        }
    }

    pub fn value(&self, lambda: &DVector<f64>, t: usize, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        lambda.dot(&self.spec.dynamics[t].eval(x, u))
            - self.nu * self.spec.stage_costs[t].value(x, u)
            - self.state_freq_term(t).dot(x)
            - self.control_freq_term(t).dot(u)
    }

    /// `dH/dlambda = f_t(x, u)`.
    pub fn grad_lambda(&self, t: usize, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        self.spec.dynamics[t].eval(x, u)
    }

    /// One-sided derivative of `H` in `x` along `y`.
    pub fn dx(&self, lambda: &DVector<f64>, t: usize, x: &DVector<f64>, u: &DVector<f64>, y: &DVector<f64>) -> f64 {
        lambda.dot(&self.spec.dynamics[t].ddx(x, u, y))
            - self.nu * self.spec.stage_costs[t].grad_x(x, u).dot(y)
            - self.state_freq_term(t).dot(y)
    }

    /// One-sided derivative of `H` in `u` along `w`.
    pub fn du(&self, lambda: &DVector<f64>, t: usize, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> f64 {
        lambda.dot(&self.spec.dynamics[t].ddu(x, u, w))
            - self.nu * self.spec.stage_costs[t].grad_u(x, u).dot(w)
            - self.control_freq_term(t).dot(w)
    }

    /// Gradient in `x` where the dynamics are smooth in `x`.
    pub fn grad_x(&self, lambda: &DVector<f64>, t: usize, x: &DVector<f64>, u: &DVector<f64>) -> Option<DVector<f64>> {
        let jx = self.spec.dynamics[t].jac_x(x, u)?;
        Some(jx.transpose() * lambda - self.spec.stage_costs[t].grad_x(x, u) * self.nu - self.state_freq_term(t))
    }

    /// Gradient in `u` where the dynamics are smooth in `u`.
    pub fn grad_u(&self, lambda: &DVector<f64>, t: usize, x: &DVector<f64>, u: &DVector<f64>) -> Option<DVector<f64>> {
        let ju = self.spec.dynamics[t].jac_u(x, u)?;
        Some(ju.transpose() * lambda - self.spec.stage_costs[t].grad_u(x, u) * self.nu - self.control_freq_term(t))
    }
}

/// Stream identifiers for per-condition direction sampling.
#[derive(Clone, Copy)]
enum Stream {
    Adjoint = 1,
    Initial = 2,
    Terminal = 3,
    HMax = 4,
}

/// Signed axes, then normalized kink directions, then `n_dirs` seeded random
/// unit directions. A larger `n_dirs` extends the same sequence.
fn probe_directions(
    dim: usize,
    n_dirs: usize,
    seed: u64,
    stream: Stream,
    stage: usize,
    kinks: Vec<DVector<f64>>,
) -> Vec<DVector<f64>> {
    let mut dirs = Vec::with_capacity(2 * dim + kinks.len() + n_dirs);
    for i in 0..dim {
        for s in [1.0, -1.0] {
            let mut e = DVector::zeros(dim);
            e[i] = s;
            dirs.push(e);
        }
    }
    for k in kinks {
        let n = k.norm();
        if n > 0.0 && n.is_finite() {
            dirs.push(k / n);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stream as u64) << 40) | stage as u64);
    dirs.extend((0..n_dirs).map(|_| random_unit(&mut rng, dim)));
    dirs
}

fn rel(raw: f64, terms: &[f64]) -> f64 {
    raw / terms.iter().fold(1.0f64, |m, v| m.max(v.abs()))
}

/// Relative distance of `eta` from `N_set(x)`, or `None` when `eta` belongs to it.
fn normal_cone_gap(set: &AdmissibleSet, x: &DVector<f64>, eta: &DVector<f64>, tol: f64) -> Result<Option<f64>> {
    let d = normal_cone(set, x)?.distance(eta) / (1.0 + eta.norm());
    Ok((d > tol || d.is_nan()).then_some(d))
}

/// `C-i` and `C-ii`.
pub fn check_nonneg_nontrivial(mult: &Multipliers, floor: f64) -> (ConditionRecord, ConditionRecord) {
    let mut nonneg = ConditionRecord::new("C-i", 0.0);
    nonneg.offer(mult.nu.abs().min((mult.nu - 1.0).abs()), None, None);
    nonneg.add_note(format!("nu = {}", mult.nu));

    let mut magnitude = mult.nu.abs().max(mult.mu_s.amax()).max(mult.mu_c.amax());
    for l in &mult.lambda {
        magnitude = magnitude.max(l.amax());
    }
    let mut nontrivial = ConditionRecord::new("C-ii", 0.0);
    nontrivial.offer((floor - magnitude).max(0.0), None, None);
    if magnitude.is_nan() {
        nontrivial.offer(f64::NAN, None, None);
    }
    nontrivial.add_note(format!("largest multiplier magnitude = {magnitude:e}"));
    (nonneg.finish(), nontrivial.finish())
}

/// `C-iii.state`: the state equation along the trajectory.
pub fn check_state_equation(spec: &ProblemSpec, sol: &Solution, tol: f64) -> ConditionRecord {
    let traj = &sol.trajectory;
    let mut rec = ConditionRecord::new("C-iii.state", tol);
    for t in 0..spec.horizon {
        let f = spec.dynamics[t].eval(&traj.states[t], &traj.controls[t]);
        let next = &traj.states[t + 1];
        rec.offer(rel((next - &f).amax(), &[next.amax(), f.amax()]), Some(t), None);
    }
    rec.finish()
}

/// `C-iii.adjoint` for stages `1..T-1`.
pub fn check_adjoint(spec: &ProblemSpec, sol: &Solution, opts: &CertificateOptions) -> ConditionRecord {
    let traj = &sol.trajectory;
    let mult = &sol.multipliers;
    let ham = HamiltonianEvaluator::new(spec, mult);
    let mut rec = ConditionRecord::new("C-iii.adjoint", opts.inequality_tol);
    for t in 1..spec.horizon {
        let (x, u, eta) = (&traj.states[t], &traj.controls[t], &mult.eta_x[t]);
        let (prev, lam) = (&mult.lambda[t - 1], &mult.lambda[t]);
        match normal_cone_gap(&spec.state_sets[t], x, eta, opts.inequality_tol) {
            Ok(Some(gap)) => {
                rec.offer(gap, Some(t), None);
                rec.add_note(format!("precondition: eta_x[{t}] is outside the normal cone"));
                continue;
            }
            Ok(None) => {}
            Err(e) => {
                rec.offer(f64::INFINITY, Some(t), None);
                rec.add_note(format!("precondition at stage {t}: {e}"));
                continue;
            }
        }
        if let Some(g) = ham.grad_x(lam, t, x, u) {
            let r = prev - (&g - eta);
            rec.offer(rel(r.amax(), &[prev.amax(), g.amax(), eta.amax()]), Some(t), None);
            rec.samples += 1;
            continue;
        }
        let kinks = spec.dynamics[t].kink_directions_x(x, u);
        for y in probe_directions(spec.state_dim, opts.n_dirs, opts.seed, Stream::Adjoint, t, kinks) {
            let lhs = prev.dot(&y);
            let dh = ham.dx(lam, t, x, u, &y);
            let ey = eta.dot(&y);
            rec.offer(rel(dh - ey - lhs, &[lhs, dh, ey]), Some(t), Some(&y));
            rec.samples += 1;
        }
    }
    if spec.horizon < 2 {
        rec.add_note("no interior stages");
    }
    rec.finish()
}

/// `C-iv.initial` and `C-iv.terminal`.
pub fn check_transversality(
    spec: &ProblemSpec,
    sol: &Solution,
    variant: TerminalVariant,
    opts: &CertificateOptions,
) -> (ConditionRecord, ConditionRecord) {
    (check_initial(spec, sol, opts), check_terminal(spec, sol, variant, opts))
}

fn singleton(set: &AdmissibleSet) -> bool {
    matches!(set, AdmissibleSet::Singleton { .. })
}

fn check_initial(spec: &ProblemSpec, sol: &Solution, opts: &CertificateOptions) -> ConditionRecord {
    let mut rec = ConditionRecord::new("C-iv.initial", opts.inequality_tol);
    if singleton(&spec.state_sets[0]) {
        rec.add_note("vacuous by singleton");
        return rec.finish();
    }
    let mult = &sol.multipliers;
    let ham = HamiltonianEvaluator::new(spec, mult);
    let (x, u, eta, lam) = (
        &sol.trajectory.states[0],
        &sol.trajectory.controls[0],
        &mult.eta_x[0],
        &mult.lambda[0],
    );
    match normal_cone_gap(&spec.state_sets[0], x, eta, opts.inequality_tol) {
        Ok(Some(gap)) => {
            rec.offer(gap, Some(0), None);
            rec.add_note("precondition: eta_x[0] is outside the normal cone");
            return rec.finish();
        }
        Ok(None) => {}
        Err(e) => {
            rec.offer(f64::INFINITY, Some(0), None);
            rec.add_note(format!("precondition: {e}"));
            return rec.finish();
        }
    }
    if let Some(g) = ham.grad_x(lam, 0, x, u) {
        let r = &g - eta;
        rec.offer(rel(r.amax(), &[g.amax(), eta.amax()]), Some(0), None);
        rec.samples = 1;
        return rec.finish();
    }
    let kinks = spec.dynamics[0].kink_directions_x(x, u);
    for y in probe_directions(spec.state_dim, opts.n_dirs, opts.seed, Stream::Initial, 0, kinks) {
        let dh = ham.dx(lam, 0, x, u, &y);
        let ey = eta.dot(&y);
        rec.offer(rel(dh - ey, &[dh, ey]), Some(0), Some(&y));
        rec.samples += 1;
    }
    rec.finish()
}

fn check_terminal(
    spec: &ProblemSpec,
    sol: &Solution,
    variant: TerminalVariant,
    opts: &CertificateOptions,
) -> ConditionRecord {
    let horizon = spec.horizon;
    let mut rec = ConditionRecord::new("C-iv.terminal", opts.inequality_tol);
    if singleton(&spec.state_sets[horizon]) {
        rec.add_note("vacuous by singleton");
        return rec.finish();
    }
    let mult = &sol.multipliers;
    let ham = HamiltonianEvaluator::new(spec, mult);
    let (x, eta, lam) = (
        &sol.trajectory.states[horizon],
        &mult.eta_x[horizon],
        &mult.lambda[horizon - 1],
    );
    match normal_cone_gap(&spec.state_sets[horizon], x, eta, opts.inequality_tol) {
        Ok(Some(gap)) => {
            rec.offer(gap, Some(horizon), None);
            rec.add_note(format!("precondition: eta_x[{horizon}] is outside the normal cone"));
            return rec.finish();
        }
        Ok(None) => {}
        Err(e) => {
            rec.offer(f64::INFINITY, Some(horizon), None);
            rec.add_note(format!("precondition: {e}"));
            return rec.finish();
        }
    }
    let freq = ham.state_freq_term(horizon);
    let cost = &spec.terminal_cost;
    let smooth = match variant {
        TerminalVariant::Auto => cost.is_smooth_at(x),
        TerminalVariant::SmoothCost => true,
        TerminalVariant::RegularCost => false,
    };
    if smooth {
        rec.add_note("smooth-cost form");
        let g = cost.grad(x) * mult.nu;
        let r = lam + &g + &freq + eta;
        rec.offer(
            rel(r.amax(), &[lam.amax(), g.amax(), freq.amax(), eta.amax()]),
            Some(horizon),
            None,
        );
        rec.samples = 1;
        return rec.finish();
    }
    rec.add_note("regular-cost form");
    for y in probe_directions(
        spec.state_dim,
        opts.n_dirs,
        opts.seed,
        Stream::Terminal,
        horizon,
        Vec::new(),
    ) {
        let terms = [lam.dot(&y), mult.nu * cost.dd(x, &y), freq.dot(&y), eta.dot(&y)];
        let total: f64 = terms.iter().sum();
        rec.offer(rel(-total, &terms), Some(horizon), Some(&y));
        rec.samples += 1;
    }
    rec.finish()
}

/// `C-v`: no tangent direction of `U_t` increases the Hamiltonian.
pub fn check_hmax(spec: &ProblemSpec, sol: &Solution, opts: &CertificateOptions) -> ConditionRecord {
    let traj = &sol.trajectory;
    let mult = &sol.multipliers;
    let ham = HamiltonianEvaluator::new(spec, mult);
    let mut rec = ConditionRecord::new("C-v", opts.inequality_tol);
    for t in 0..spec.horizon {
        let (x, u, lam) = (&traj.states[t], &traj.controls[t], &mult.lambda[t]);
        let set = &spec.control_sets[t];
        match set.distance(u) {
            Ok(d) if d <= opts.inequality_tol * (1.0 + u.amax()) => {}
            Ok(d) => {
                rec.offer(f64::INFINITY, Some(t), None);
                rec.add_note(format!("precondition: u[{t}] is outside U_t by {d:e}"));
                continue;
            }
            Err(e) => {
                rec.offer(f64::INFINITY, Some(t), None);
                rec.add_note(format!("precondition at stage {t}: {e}"));
                continue;
            }
        }
        if let Some(g) = ham.grad_u(lam, t, x, u) {
            let d = normal_cone(set, u).map(|c| c.distance(&g)).unwrap_or(f64::INFINITY);
            rec.offer(rel(d, &[g.amax()]), Some(t), None);
            rec.samples += 1;
            continue;
        }
        let kinks = spec.dynamics[t].kink_directions_u(x, u);
        for w in probe_directions(spec.control_dim, opts.n_dirs, opts.seed, Stream::HMax, t, kinks) {
            if !tangent_contains(set, u, &w).unwrap_or(false) {
                continue;
            }
            let dh = ham.du(lam, t, x, u, &w);
            let parts = [
                lam.dot(&spec.dynamics[t].ddu(x, u, &w)),
                mult.nu * spec.stage_costs[t].grad_u(x, u).dot(&w),
                ham.control_freq_term(t).dot(&w),
            ];
            rec.offer(rel(dh, &parts), Some(t), Some(&w));
            rec.samples += 1;
        }
    }
    rec.finish()
}

/// `C-vi` and `C-vii`.
pub fn check_frequency(spec: &ProblemSpec, sol: &Solution, tol: f64) -> (ConditionRecord, ConditionRecord) {
    let one = |name: &str, fc: Option<&crate::spectrum::FrequencyConstraint>, signal: &[DVector<f64>]| {
        let mut rec = ConditionRecord::new(name, tol);
        match fc {
            None => rec.add_note("no constraint"),
            Some(fc) => match constraint_residual(fc, signal) {
                Ok(r) => {
                    let scale = signal.iter().fold(0.0f64, |m, v| m.max(v.amax()));
                    rec.offer(rel(r.amax(), &[scale]), None, None);
                    rec.samples = r.len();
                }
                Err(e) => {
                    rec.offer(f64::INFINITY, None, None);
                    rec.add_note(e.to_string());
                }
            },
        }
        rec.finish()
    };
    let traj = &sol.trajectory;
    (
        one("C-vi", spec.state_freq.as_ref(), &traj.states),
        one("C-vii", spec.control_freq.as_ref(), &traj.controls),
    )
}

fn check_solution_dims(spec: &ProblemSpec, sol: &Solution) -> Result<()> {
    let traj = &sol.trajectory;
    if traj.states.len() != spec.horizon + 1 {
        return Err(Error::dim("trajectory states", spec.horizon + 1, traj.states.len()));
    }
    if traj.controls.len() != spec.horizon {
        return Err(Error::dim("trajectory controls", spec.horizon, traj.controls.len()));
    }
    for x in &traj.states {
        if x.len() != spec.state_dim {
            return Err(Error::dim("state", spec.state_dim, x.len()));
        }
    }
    for u in &traj.controls {
        if u.len() != spec.control_dim {
            return Err(Error::dim("control", spec.control_dim, u.len()));
        }
    }
    sol.multipliers.check_dims(spec)
}

/// Run every check. Fails only on dimension mismatches; all other problems
/// become failed records.
pub fn certify(spec: &ProblemSpec, sol: &Solution, opts: &CertificateOptions) -> Result<CertificateReport> {
    check_solution_dims(spec, sol)?;
    let (c1, c2) = check_nonneg_nontrivial(&sol.multipliers, opts.nontriviality_floor);
    let (c4i, c4t) = check_transversality(spec, sol, opts.terminal_variant, opts);
    let (c6, c7) = check_frequency(spec, sol, opts.equality_tol);
    let records = vec![
        c1,
        c2,
        check_state_equation(spec, sol, opts.equality_tol),
        check_adjoint(spec, sol, opts),
        c4i,
        c4t,
        check_hmax(spec, sol, opts),
        c6,
        c7,
    ];
    Ok(CertificateReport {
        passed: records.iter().all(|r| r.passed),
        seed: opts.seed,
        n_dirs: opts.n_dirs,
        records,
    })
}
