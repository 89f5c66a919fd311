//! Augmented-Lagrangian path for nonlinear and piecewise-smooth problems.
//!
//! The equality constraints `h = (D, S, U)` are handled by multipliers and a
//! quadratic penalty; the pointwise sets are enforced exactly by projection.
//! Gradients of `D` use each oracle's designated-branch Jacobians.

use std::ops::{AddAssign, SubAssign};

use nalgebra::{DMatrix, DVector};

use super::{Diagnostics, Solution, SolverOptions};
use crate::cones::{normal_cone, project, AdmissibleSet};
use crate::error::{Error, Result};
use crate::lift::{LiftedPoint, LiftedProblem, Multipliers};
use crate::linalg::nnls;
use crate::problem::{simulate, total_cost, validate, ProblemSpec};

/// Multiplier recovery by nonnegative least squares is attempted up to this lifted dimension.
const NNLS_RECOVERY_MAX_DIM: usize = 400;

/// Inner iterations take projected Newton steps up to this lifted dimension.
const NEWTON_MAX_DIM: usize = 600;

struct Workspace<'a> {
    spec: &'a ProblemSpec,
    lifted: LiftedProblem<'a>,
    jac_s: DMatrix<f64>,
    jac_u: DMatrix<f64>,
    n_dyn: usize,
    /// Coordinate bounds from box-like sets; other sets contribute `-inf..inf`.
    lo: DVector<f64>,
    hi: DVector<f64>,
}

impl<'a> Workspace<'a> {
    fn new(spec: &'a ProblemSpec) -> Self {
        let lifted = LiftedProblem::new(spec);
        let dim = spec.lifted_dim();
        let mut lo = DVector::from_element(dim, f64::NEG_INFINITY);
        let mut hi = DVector::from_element(dim, f64::INFINITY);
        let blocks = (0..=spec.horizon)
            .map(|t| (&spec.state_sets[t], t * spec.state_dim))
            .chain((0..spec.horizon).map(|t| {
                (
                    &spec.control_sets[t],
                    (spec.horizon + 1) * spec.state_dim + t * spec.control_dim,
                )
            }));
        for (set, off) in blocks {
            let bounds = match set {
                AdmissibleSet::Box { lo, hi } => Some((lo.clone(), hi.clone())),
                AdmissibleSet::Singleton { point } => Some((point.clone(), point.clone())),
                _ => None,
            };
            if let Some((l, h)) = bounds {
                lo.rows_mut(off, l.len()).copy_from(&l);
                hi.rows_mut(off, h.len()).copy_from(&h);
            }
        }
        Self {
            spec,
            lo,
            hi,
            jac_s: lifted.state_freq_jacobian(),
            jac_u: lifted.control_freq_jacobian(),
            lifted,
            n_dyn: spec.state_dim * spec.horizon,
        }
    }

    fn point(&self, z: &DVector<f64>) -> LiftedPoint {
        let s = self.spec;
        LiftedPoint::from_data(z.clone(), s.state_dim, s.control_dim, s.horizon).expect("workspace dimensions")
    }

    fn constraints(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        let p = self.point(z);
        let d = self.lifted.dynamics_residual(&p)?;
        let s = self.lifted.state_freq_residual(&p)?;
        let u = self.lifted.control_freq_residual(&p)?;
        let mut h = DVector::zeros(d.len() + s.len() + u.len());
        h.rows_mut(0, d.len()).copy_from(&d);
        h.rows_mut(d.len(), s.len()).copy_from(&s);
        h.rows_mut(d.len() + s.len(), u.len()).copy_from(&u);
        Ok(h)
    }

    /// `J_h' v` using designated-branch Jacobians for the dynamics rows.
    fn jt_times(&self, z: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let s = self.spec;
        let p = self.point(z);
        let (n, m) = (s.state_dim, s.control_dim);
        let mut out = DVector::zeros(z.len());
        for t in 0..s.horizon {
            let vt = v.rows(t * n, n);
            let (jx, ju) = s.dynamics[t].branch_jacobians(&p.state(t), &p.control(t));
            out.rows_mut(p.state_offset(t + 1), n).add_assign(&vt);
            out.rows_mut(p.state_offset(t), n).sub_assign(&(jx.transpose() * vt));
            out.rows_mut(p.control_offset(t), m).sub_assign(&(ju.transpose() * vt));
        }
        let ls = self.jac_s.nrows();
        if ls > 0 {
            out += self.jac_s.transpose() * v.rows(self.n_dyn, ls);
        }
        let lu = self.jac_u.nrows();
        if lu > 0 {
            out += self.jac_u.transpose() * v.rows(self.n_dyn + ls, lu);
        }
        out
    }

    /// Dense `J_h'` (columns are constraint gradients).
    fn jt_dense(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let nh = self.n_dyn + self.jac_s.nrows() + self.jac_u.nrows();
        let mut j = DMatrix::zeros(z.len(), nh);
        for k in 0..nh {
            let mut e = DVector::zeros(nh);
            e[k] = 1.0;
            j.set_column(k, &self.jt_times(z, &e));
        }
        j
    }

    fn cost_grad(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        self.lifted.cost_gradient(&self.point(z))
    }

    fn cost(&self, z: &DVector<f64>) -> Result<f64> {
        self.lifted.cost(&self.point(z))
    }

    fn project(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        let s = self.spec;
        let p = self.point(z);
        let mut out = z.clone();
        for t in 0..=s.horizon {
            let q = project(&s.state_sets[t], &p.state(t))?;
            out.rows_mut(p.state_offset(t), s.state_dim).copy_from(&q);
        }
        for t in 0..s.horizon {
            let q = project(&s.control_sets[t], &p.control(t))?;
            out.rows_mut(p.control_offset(t), s.control_dim).copy_from(&q);
        }
        Ok(out)
    }

    /// Coordinates held at a bound: at (or within `eps` of) a bound with the
    /// gradient pointing outward, or fixed by a singleton.
    fn active_coordinates(&self, z: &DVector<f64>, g: &DVector<f64>, eps: f64) -> Vec<bool> {
        (0..z.len())
            .map(|i| {
                let (lo, hi) = (self.lo[i], self.hi[i]);
                lo == hi || (z[i] <= lo + eps && g[i] > 0.0) || (z[i] >= hi - eps && g[i] < 0.0)
            })
            .collect()
    }

    /// Augmented Lagrangian value, or `None` when any term is non-finite.
    fn merit(&self, z: &DVector<f64>, y: &DVector<f64>, rho: f64) -> Option<f64> {
        let c = self.cost(z).ok()?;
        let h = self.constraints(z).ok()?;
        let v = c + y.dot(&h) + 0.5 * rho * h.norm_squared();
        v.is_finite().then_some(v)
    }

    fn merit_grad(&self, z: &DVector<f64>, y: &DVector<f64>, rho: f64) -> Result<DVector<f64>> {
        let h = self.constraints(z)?;
        Ok(self.cost_grad(z)? + self.jt_times(z, &(y + h * rho)))
    }

    /// Set-by-set normal cones at `z`, as generator blocks embedded in `R^M`.
    fn normal_generators(&self, z: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
        let s = self.spec;
        let p = self.point(z);
        let mut gens = Vec::new();
        for t in 0..=s.horizon {
            gens.extend(self.lifted.lifted_state_normal(t, &p)?);
        }
        for t in 0..s.horizon {
            for g in normal_cone(&s.control_sets[t], &p.control(t))?.generators {
                let mut e = DVector::zeros(z.len());
                e.rows_mut(p.control_offset(t), s.control_dim).copy_from(&g);
                gens.push(e);
            }
        }
        Ok(gens)
    }
}

struct Inner {
    z: DVector<f64>,
    iterations: usize,
    pg_norm: f64,
    /// The line search could not decrease the merit function.
    stalled: bool,
}

fn inner_solve(
    ws: &Workspace,
    z0: DVector<f64>,
    y: &DVector<f64>,
    rho: f64,
    tol: f64,
    opts: &SolverOptions,
) -> Result<Inner> {
    let mut z = z0;
    let mut f = ws.merit(&z, y, rho).ok_or_else(|| Error::NonFinite {
        stage: 0,
        what: "augmented Lagrangian at the starting point".into(),
    })?;
    let mut g = ws.merit_grad(&z, y, rho)?;
    let mut step = 1.0 / (1.0 + g.amax());
    let mut pg_norm = (&z - ws.project(&(&z - &g))?).amax();
    let mut iterations = 0;
    let use_newton = z.len() <= NEWTON_MAX_DIM;
    let mut stalled = false;

    while iterations < opts.max_inner_iters && pg_norm > tol {
        iterations += 1;
        let mut accepted = None;
        if use_newton {
            let active = ws.active_coordinates(&z, &g, pg_norm.min(1e-6));
            if let Some(d) = newton_direction(ws, &z, &g, y, rho, &active) {
                accepted = line_search(ws, &z, f, &g, &d, 1.0, y, rho, opts, 40)?;
            }
        }
        if accepted.is_none() {
            accepted = line_search(ws, &z, f, &g, &(-&g), step, y, rho, opts, 80)?;
        }
        let Some((zn, fnew)) = accepted else {
            stalled = true;
            break;
        };
        let gn = ws.merit_grad(&zn, y, rho)?;
        let sk = &zn - &z;
        let yk = &gn - &g;
        let sy = sk.dot(&yk);
        step = if sy > 0.0 {
            (sk.norm_squared() / sy).clamp(1e-14, 1e14)
        } else {
            step * 2.0
        };
        z = zn;
        f = fnew;
        g = gn;
        pg_norm = (&z - ws.project(&(&z - &g))?).amax();
    }
    Ok(Inner {
        z,
        iterations,
        pg_norm,
        stalled,
    })
}

/// Armijo search along the projected arc `P(z + s d)`.
#[allow(clippy::too_many_arguments)]
fn line_search(
    ws: &Workspace,
    z: &DVector<f64>,
    f: f64,
    g: &DVector<f64>,
    d: &DVector<f64>,
    s0: f64,
    y: &DVector<f64>,
    rho: f64,
    opts: &SolverOptions,
    max_halvings: usize,
) -> Result<Option<(DVector<f64>, f64)>> {
    let mut s = s0;
    for _ in 0..max_halvings {
        let trial = ws.project(&(z + d * s))?;
        let predicted = g.dot(&(&trial - z));
        if predicted < 0.0 {
            if let Some(ft) = ws.merit(&trial, y, rho) {
                if ft <= f + opts.armijo_slope * predicted {
                    return Ok(Some((trial, ft)));
                }
            }
        }
        s *= opts.armijo_factor;
    }
    Ok(None)
}

/// Newton direction on the free coordinates (finite-difference Hessian of the
/// merit function, shifted until positive definite) and a gradient step on
/// the coordinates held at a bound.
fn newton_direction(
    ws: &Workspace,
    z: &DVector<f64>,
    g: &DVector<f64>,
    y: &DVector<f64>,
    rho: f64,
    active: &[bool],
) -> Option<DVector<f64>> {
    let free: Vec<usize> = (0..z.len()).filter(|&i| !active[i]).collect();
    let mut d = -g;
    let k = free.len();
    if k == 0 {
        return Some(d);
    }
    let mut h = DMatrix::zeros(k, k);
    for (c, &j) in free.iter().enumerate() {
        let step = 1e-6 * (1.0 + z[j].abs());
        let mut zp = z.clone();
        zp[j] += step;
        let mut zm = z.clone();
        zm[j] -= step;
        let gp = ws.merit_grad(&zp, y, rho).ok()?;
        let gm = ws.merit_grad(&zm, y, rho).ok()?;
        for (r, &i) in free.iter().enumerate() {
            h[(r, c)] = (gp[i] - gm[i]) / (2.0 * step);
        }
    }
    let h = (&h + h.transpose()) * 0.5;
    let gf = DVector::from_iterator(k, free.iter().map(|&i| -g[i]));
    let scale = h.diagonal().amax().max(1e-12);
    let mut shift = 0.0;
    for _ in 0..30 {
        let mut m = h.clone();
        for i in 0..k {
            m[(i, i)] += shift;
        }
        if let Some(ch) = m.cholesky() {
            let df = ch.solve(&gf);
            if df.iter().all(|v| v.is_finite()) {
                for (r, &i) in free.iter().enumerate() {
                    d[i] = df[r];
                }
                return Some(d);
            }
        }
        shift = if shift == 0.0 { 1e-10 * scale } else { shift * 10.0 };
    }
    None
}

/// Equality and set multipliers at `z` for fixed constraint multipliers `y`.
fn set_multipliers(ws: &Workspace, z: &DVector<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    let s = ws.spec;
    let p = ws.point(z);
    let r = -(ws.cost_grad(z)? + ws.jt_times(z, y));
    let mut eta = DVector::zeros(z.len());
    for t in 0..=s.horizon {
        let off = p.state_offset(t);
        let block = r.rows(off, s.state_dim).into_owned();
        let cone = normal_cone(&s.state_sets[t], &p.state(t))?;
        eta.rows_mut(off, s.state_dim).copy_from(&cone.project(&block));
    }
    for t in 0..s.horizon {
        let off = p.control_offset(t);
        let block = r.rows(off, s.control_dim).into_owned();
        let cone = normal_cone(&s.control_sets[t], &p.control(t))?;
        eta.rows_mut(off, s.control_dim).copy_from(&cone.project(&block));
    }
    let resid = &eta - &r;
    Ok((eta, resid))
}

/// Least-squares multiplier recovery `min |grad C + J' y + sum c_g g|`, `c >= 0`.
fn recover_multipliers(ws: &Workspace, z: &DVector<f64>) -> Result<DVector<f64>> {
    let jt = ws.jt_dense(z);
    let gens = ws.normal_generators(z)?;
    let nh = jt.ncols();
    let mut a = DMatrix::zeros(z.len(), 2 * nh + gens.len());
    a.view_mut((0, 0), (z.len(), nh)).copy_from(&jt);
    a.view_mut((0, nh), (z.len(), nh)).copy_from(&(-&jt));
    for (k, g) in gens.iter().enumerate() {
        a.set_column(2 * nh + k, g);
    }
    let b = -ws.cost_grad(z)?;
    let c = nnls(&a, &b);
    Ok(c.rows(0, nh) - c.rows(nh, nh))
}

fn unpack(ws: &Workspace, y: &DVector<f64>, eta: &DVector<f64>) -> Multipliers {
    let s = ws.spec;
    let e = ws.point(eta);
    let n = s.state_dim;
    let ls = ws.jac_s.nrows();
    let lu = ws.jac_u.nrows();
    Multipliers {
        nu: 1.0,
        lambda: (0..s.horizon).map(|t| y.rows(t * n, n).into_owned()).collect(),
        mu_s: y.rows(ws.n_dyn, ls).into_owned(),
        mu_c: y.rows(ws.n_dyn + ls, lu).into_owned(),
        eta_x: (0..=s.horizon).map(|t| e.state(t)).collect(),
        eta_u: (0..s.horizon).map(|t| e.control(t)).collect(),
    }
}

/// Initial guess: roll out zero controls from the fixed initial state (or
/// the projection of zero), falling back to all zeros if the rollout fails.
fn initial_point(ws: &Workspace) -> Result<DVector<f64>> {
    let s = ws.spec;
    let controls: Vec<DVector<f64>> = (0..s.horizon)
        .map(|t| project(&s.control_sets[t], &DVector::zeros(s.control_dim)))
        .collect::<Result<_>>()?;
    let x0 = project(&s.state_sets[0], &DVector::zeros(s.state_dim))?;
    let z = match simulate(s, &x0, &controls) {
        Ok(states) => LiftedPoint::lift(&states, &controls)?.data,
        Err(_) => DVector::zeros(s.lifted_dim()),
    };
    ws.project(&z)
}

fn check_projectable(spec: &ProblemSpec) -> Result<()> {
    for set in spec.state_sets.iter().chain(&spec.control_sets) {
        if let AdmissibleSet::HalfspaceIntersection { rows, .. } = set {
            if rows.nrows() != 1 {
                return Err(Error::Unsupported {
                    op: "solve_general",
                    variant: "sets without a closed-form projection".into(),
                });
            }
        }
    }
    Ok(())
}

/// Augmented-Lagrangian solve with projected-gradient inner iterations.
pub fn solve_general(spec: &ProblemSpec, opts: &SolverOptions) -> Result<Solution> {
    opts.check()?;
    validate(spec).into_result()?;
    check_projectable(spec)?;
    let ws = Workspace::new(spec);

    let mut z = initial_point(&ws)?;
    let nh = ws.n_dyn + ws.jac_s.nrows() + ws.jac_u.nrows();
    let mut y = DVector::zeros(nh);
    let mut rho = opts.penalty_init;
    let mut history = Vec::new();
    let mut total_inner = 0;
    let mut prev_violation = f64::INFINITY;
    let mut inner_tol = 1e-2;
    let final_inner_tol = opts.stationarity_tol * 1e-3;
    let eq_target = opts.equality_tol * 1e-2;

    for outer in 1..=opts.max_outer_iters {
        let gscale = 1.0 + ws.cost_grad(&z)?.amax();
        let inner = inner_solve(&ws, z, &y, rho, inner_tol * gscale, opts)?;
        total_inner += inner.iterations;
        z = inner.z;
        let h = ws.constraints(&z)?;
        let violation = h.amax();
        history.push(violation);
        y += &h * rho;

        if violation <= eq_target {
            let inner_ok = inner.pg_norm <= final_inner_tol * gscale;
            // at a kink the designated-branch gradient need not vanish; accept
            // the point when recovered multipliers make it stationary
            if inner_ok || inner.stalled {
                let (ym, eta, stationarity) = recover(&ws, &z, &y)?;
                if inner_ok || stationarity <= opts.stationarity_tol * 1e-2 * gscale {
                    return finish(&ws, z, ym, eta, stationarity, rho, history, total_inner, outer);
                }
            }
        }
        if violation > eq_target && violation > opts.violation_shrink * prev_violation {
            rho *= opts.penalty_growth;
        }
        if rho > 1e14 {
            return Err(Error::NotConverged {
                iterations: outer,
                reason: format!("constraint violation stalled at {violation:.3e}; penalty exhausted"),
            });
        }
        prev_violation = prev_violation.min(violation);
        inner_tol = (inner_tol * 0.1).max(final_inner_tol);
    }
    let violation = history.last().copied().unwrap_or(f64::INFINITY);
    Err(Error::NotConverged {
        iterations: opts.max_outer_iters,
        reason: format!("constraint violation {violation:.3e} after the outer iteration cap"),
    })
}

/// Best multipliers at `z`: from the running estimate, or from the
/// nonnegative least-squares fit when it is smaller in residual.
fn recover(ws: &Workspace, z: &DVector<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>, f64)> {
    let (eta, resid) = set_multipliers(ws, z, y)?;
    let mut best = (y.clone(), eta, resid.amax());
    if z.len() <= NNLS_RECOVERY_MAX_DIM {
        let y2 = recover_multipliers(ws, z)?;
        let (eta2, resid2) = set_multipliers(ws, z, &y2)?;
        let r2 = resid2.amax();
        if r2 < best.2 {
            best = (y2, eta2, r2);
        }
    }
    Ok(best)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    ws: &Workspace,
    z: DVector<f64>,
    y: DVector<f64>,
    eta: DVector<f64>,
    stationarity: f64,
    rho: f64,
    history: Vec<f64>,
    iterations: usize,
    outer: usize,
) -> Result<Solution> {
    let mult = unpack(ws, &y, &eta);
    let trajectory = ws.point(&z).to_trajectory();
    let objective = total_cost(ws.spec, &trajectory)?;
    Ok(Solution {
        trajectory,
        multipliers: mult,
        objective,
        diagnostics: Diagnostics {
            method: "augmented-lagrangian".into(),
            iterations,
            outer_iterations: outer,
            constraint_violation: history.last().copied().unwrap_or(0.0),
            stationarity,
            active_bounds: 0,
            violation_history: history,
            final_penalty: rho,
        },
    })
}
