//! Dual active-set method for the lifted convex QP.
//!
//! The equality rows (dynamics, fixed coordinates, frequency maps) are always
//! active and are factored once in `K0 = [H E'; E 0]`. Bounds enter one at a
//! time through a small Schur complement, starting from the
//! equality-constrained minimizer, so no feasible starting point is needed.

use std::collections::HashMap;

use std::ops::AddAssign;

use nalgebra::{DMatrix, DVector, LU};

use super::{Diagnostics, Solution, SolverOptions};
use crate::cones::AdmissibleSet;
use crate::error::{Error, Result};
use crate::lift::{LiftedPoint, Multipliers};
use crate::linalg::least_squares;
use crate::problem::{total_cost, validate, ProblemSpec};

/// Whether `spec` fits the active-set path.
pub(super) fn qualifies(spec: &ProblemSpec) -> bool {
    let simple = |s: &AdmissibleSet| {
        matches!(
            s,
            AdmissibleSet::Box { .. } | AdmissibleSet::Singleton { .. } | AdmissibleSet::Whole { .. }
        )
    };
    spec.is_linear_quadratic() && spec.state_sets.iter().chain(&spec.control_sets).all(simple)
}

#[derive(Clone, Copy, Debug)]
enum Row {
    Dynamics { t: usize, i: usize },
    FixState { t: usize, i: usize },
    FixControl { t: usize, i: usize },
    StateFreq(usize),
    ControlFreq(usize),
}

/// Simple bound `sign * z[var] <= rhs`.
#[derive(Clone, Copy, Debug)]
struct Bound {
    var: usize,
    sign: f64,
    rhs: f64,
}

struct Qp {
    h: DMatrix<f64>,
    g: DVector<f64>,
    e: DMatrix<f64>,
    e_rhs: DVector<f64>,
    rows: Vec<Row>,
    bounds: Vec<Bound>,
}

fn assemble(spec: &ProblemSpec) -> Result<Qp> {
    let (n, m, horizon) = (spec.state_dim, spec.control_dim, spec.horizon);
    let mdim = spec.lifted_dim();
    let xo = |t: usize| t * n;
    let uo = |t: usize| n * (horizon + 1) + t * m;

    let mut h = DMatrix::zeros(mdim, mdim);
    let mut g = DVector::zeros(mdim);
    for t in 0..horizon {
        let c = spec.stage_costs[t].as_quadratic().expect("checked by qualifies");
        let mut block = DMatrix::zeros(n + m, n + m);
        block.view_mut((0, 0), (n, n)).copy_from(&c.q);
        block.view_mut((n, n), (m, m)).copy_from(&c.r);
        block.view_mut((0, n), (n, m)).copy_from(&c.n);
        block.view_mut((n, 0), (m, n)).copy_from(&c.n.transpose());
        let sym = (&block + block.transpose()) * 0.5;
        if sym.clone().symmetric_eigenvalues().min() < -1e-10 * (1.0 + sym.amax()) {
            return Err(Error::InvalidProblem(format!("stage cost {t} is not convex")));
        }
        h.view_mut((xo(t), xo(t)), (n, n)).add_assign(&sym.view((0, 0), (n, n)));
        h.view_mut((uo(t), uo(t)), (m, m)).add_assign(&sym.view((n, n), (m, m)));
        h.view_mut((xo(t), uo(t)), (n, m)).add_assign(&sym.view((0, n), (n, m)));
        h.view_mut((uo(t), xo(t)), (m, n)).add_assign(&sym.view((n, 0), (m, n)));
        g.rows_mut(xo(t), n).add_assign(&c.q_lin);
        g.rows_mut(uo(t), m).add_assign(&c.r_lin);
    }
    let term = spec.terminal_cost.as_quadratic().expect("checked by qualifies");
    let qt = (&term.q + term.q.transpose()) * 0.5;
    if qt.clone().symmetric_eigenvalues().min() < -1e-10 * (1.0 + qt.amax()) {
        return Err(Error::InvalidProblem("terminal cost is not convex".into()));
    }
    h.view_mut((xo(horizon), xo(horizon)), (n, n)).add_assign(&qt);
    g.rows_mut(xo(horizon), n).add_assign(&term.q_lin);

    let mut erows: Vec<(DVector<f64>, f64, Row)> = Vec::new();
    for t in 0..horizon {
        let lin = spec.dynamics[t].as_affine().expect("checked by qualifies");
        for i in 0..n {
            let mut r = DVector::zeros(mdim);
            r[xo(t + 1) + i] = 1.0;
            for j in 0..n {
                r[xo(t) + j] -= lin.a[(i, j)];
            }
            for j in 0..m {
                r[uo(t) + j] -= lin.b[(i, j)];
            }
            erows.push((r, lin.c[i], Row::Dynamics { t, i }));
        }
    }

    let mut bounds = Vec::new();
    let mut add_set =
        |set: &AdmissibleSet, off: usize, fix: &dyn Fn(usize) -> Row, erows: &mut Vec<(DVector<f64>, f64, Row)>| {
            let mut fix_var = |i: usize, val: f64| {
                let mut r = DVector::zeros(mdim);
                r[off + i] = 1.0;
                erows.push((r, val, fix(i)));
            };
            match set {
                AdmissibleSet::Singleton { point } => point.iter().enumerate().for_each(|(i, &p)| fix_var(i, p)),
                AdmissibleSet::Box { lo, hi } => {
                    for i in 0..lo.len() {
                        if lo[i] == hi[i] {
                            fix_var(i, lo[i]);
                            continue;
                        }
                        if lo[i].is_finite() {
                            bounds.push(Bound {
                                var: off + i,
                                sign: -1.0,
                                rhs: -lo[i],
                            });
                        }
                        if hi[i].is_finite() {
                            bounds.push(Bound {
                                var: off + i,
                                sign: 1.0,
                                rhs: hi[i],
                            });
                        }
                    }
                }
                AdmissibleSet::Whole { .. } => {}
                _ => unreachable!("checked by qualifies"),
            }
        };
    for t in 0..=horizon {
        add_set(&spec.state_sets[t], xo(t), &|i| Row::FixState { t, i }, &mut erows);
    }
    for t in 0..horizon {
        add_set(&spec.control_sets[t], uo(t), &|i| Row::FixControl { t, i }, &mut erows);
    }

    if let Some(fc) = &spec.state_freq {
        for r in 0..fc.rows() {
            let mut row = DVector::zeros(mdim);
            for (t, gt) in fc.stage_maps.iter().enumerate() {
                for j in 0..n {
                    row[xo(t) + j] = gt[(r, j)];
                }
            }
            erows.push((row, -fc.offset[r], Row::StateFreq(r)));
        }
    }
    if let Some(fc) = &spec.control_freq {
        for r in 0..fc.rows() {
            let mut row = DVector::zeros(mdim);
            for (t, gt) in fc.stage_maps.iter().enumerate() {
                for j in 0..m {
                    row[uo(t) + j] = gt[(r, j)];
                }
            }
            erows.push((row, -fc.offset[r], Row::ControlFreq(r)));
        }
    }

    let ne = erows.len();
    let mut e = DMatrix::zeros(ne, mdim);
    let mut e_rhs = DVector::zeros(ne);
    let mut rows = Vec::with_capacity(ne);
    for (k, (r, b, kind)) in erows.into_iter().enumerate() {
        e.set_row(k, &r.transpose());
        e_rhs[k] = b;
        rows.push(kind);
    }
    Ok(Qp {
        h,
        g,
        e,
        e_rhs,
        rows,
        bounds,
    })
}

/// Report why `K0` is singular: inconsistent rows, redundant rows, or a cost
/// that is not strictly convex on the equality subspace.
fn diagnose_singular(qp: &Qp) -> Error {
    let svd = qp.e.clone().svd(false, false);
    let smax = svd.singular_values.max().max(1.0);
    let rank = svd.singular_values.iter().filter(|&&s| s > 1e-10 * smax).count();
    if rank < qp.e.nrows() {
        let z = least_squares(&qp.e, &qp.e_rhs);
        let resid = (&qp.e * z - &qp.e_rhs).amax();
        if resid > 1e-8 * (1.0 + qp.e_rhs.amax()) {
            return Error::Infeasible(format!(
                "equality constraints are inconsistent (rank {rank} of {} rows, least-squares residual {resid:.3e})",
                qp.e.nrows()
            ));
        }
        return Error::Infeasible(format!(
            "equality constraints are rank-deficient (rank {rank} of {} rows)",
            qp.e.nrows()
        ));
    }
    Error::InvalidProblem("cost is not strictly convex on the subspace cut out by the equality constraints".into())
}

/// Exact KKT solve of the lifted QP by a dual active-set iteration.
pub fn solve_lq(spec: &ProblemSpec, opts: &SolverOptions) -> Result<Solution> {
    opts.check()?;
    validate(spec).into_result()?;
    if !qualifies(spec) {
        return Err(Error::Unsupported {
            op: "solve_lq",
            variant: "problem with non-affine dynamics, non-quadratic costs, or sets other than Box/Singleton/Whole"
                .into(),
        });
    }
    let qp = assemble(spec)?;
    let (mdim, ne) = (qp.h.nrows(), qp.e.nrows());
    let nk = mdim + ne;

    let mut k0 = DMatrix::zeros(nk, nk);
    k0.view_mut((0, 0), (mdim, mdim)).copy_from(&qp.h);
    k0.view_mut((mdim, 0), (ne, mdim)).copy_from(&qp.e);
    k0.view_mut((0, mdim), (mdim, ne)).copy_from(&qp.e.transpose());
    let scale = k0.amax().max(1.0);
    let lu = LU::new(k0);
    let udiag = lu.u().diagonal();
    let pivot_min = udiag.iter().fold(f64::INFINITY, |a, &b| a.min(b.abs()));
    if pivot_min <= 1e-12 * scale {
        return Err(diagnose_singular(&qp));
    }

    let solve_k0 = |rhs: &DVector<f64>| -> DVector<f64> { lu.solve(rhs).expect("nonsingular pivots checked") };

    let mut rhs0 = DVector::zeros(nk);
    rhs0.rows_mut(0, mdim).copy_from(&(-&qp.g));
    rhs0.rows_mut(mdim, ne).copy_from(&qp.e_rhs);
    let v0 = solve_k0(&rhs0);

    let mut cols: HashMap<usize, DVector<f64>> = HashMap::new();
    let mut column = |j: usize| -> DVector<f64> {
        cols.entry(j)
            .or_insert_with(|| {
                let b = qp.bounds[j];
                let mut r = DVector::zeros(nk);
                r[b.var] = b.sign;
                solve_k0(&r)
            })
            .clone()
    };

    let tol_of = |b: &Bound| opts.activity_tol * 0.1 * (1.0 + b.rhs.abs());
    let violation = |b: &Bound, z: &DVector<f64>| b.sign * z[b.var] - b.rhs;

    let mut v = v0.clone();
    let mut active: Vec<usize> = Vec::new();
    let mut w: Vec<f64> = Vec::new();
    let mut iterations = 0usize;

    loop {
        let z = v.rows(0, mdim).into_owned();
        let mut pick: Option<(usize, f64)> = None;
        for (j, b) in qp.bounds.iter().enumerate() {
            if active.contains(&j) {
                continue;
            }
            let s = violation(b, &z);
            if s > tol_of(b) && pick.is_none_or(|(_, best)| s > best) {
                pick = Some((j, s));
            }
        }
        let Some((p, _)) = pick else { break };
        let mut wp = 0.0;

        loop {
            iterations += 1;
            if iterations > opts.max_active_set_iters {
                return Err(Error::NotConverged {
                    iterations,
                    reason: format!("active-set iteration cap reached with {} active bounds", active.len()),
                });
            }
            let cp = column(p);
            let cw: Vec<DVector<f64>> = active.iter().map(|&j| column(j)).collect();
            let k = active.len();
            let dw = if k == 0 {
                DVector::zeros(0)
            } else {
                let s = DMatrix::from_fn(k, k, |a, c| {
                    let ba = qp.bounds[active[a]];
                    ba.sign * cw[c][ba.var]
                });
                let rhs = DVector::from_fn(k, |a, _| {
                    let ba = qp.bounds[active[a]];
                    -ba.sign * cp[ba.var]
                });
                s.lu().solve(&rhs).ok_or_else(|| Error::NotConverged {
                    iterations,
                    reason: "active bound set became linearly dependent".into(),
                })?
            };
            let mut dv = -&cp;
            for (a, c) in cw.iter().enumerate() {
                dv -= c * dw[a];
            }
            let bp = qp.bounds[p];
            let curvature = -bp.sign * dv[bp.var];

            let mut block: Option<(usize, f64)> = None;
            for a in 0..k {
                if dw[a] < 0.0 {
                    let t = w[a] / -dw[a];
                    if block.is_none_or(|(_, best)| t < best) {
                        block = Some((a, t));
                    }
                }
            }

            let dependent = curvature <= 1e-13 * (1.0 + cp.amax());
            let full = if dependent {
                None
            } else {
                Some(violation(&bp, &v.rows(0, mdim).into_owned()) / curvature)
            };
            let (t, drop) = match (full, block) {
                (None, None) => {
                    return Err(Error::Infeasible(format!(
                        "bound on variable {} conflicts with the equality constraints and active bounds",
                        bp.var
                    )))
                }
                (None, Some((a, tb))) => (tb, Some(a)),
                (Some(tf), Some((a, tb))) if tb < tf => (tb, Some(a)),
                (Some(tf), _) => (tf, None),
            };
            v += &dv * t;
            for a in 0..k {
                w[a] += t * dw[a];
            }
            wp += t;
            match drop {
                Some(a) => {
                    active.remove(a);
                    w.remove(a);
                }
                None => {
                    active.push(p);
                    w.push(wp);
                    break;
                }
            }
        }
    }

    // re-solve the final system once to shed accumulated rounding
    let k = active.len();
    if k > 0 {
        let cw: Vec<DVector<f64>> = active.iter().map(|&j| column(j)).collect();
        let s = DMatrix::from_fn(k, k, |a, c| {
            let ba = qp.bounds[active[a]];
            ba.sign * cw[c][ba.var]
        });
        let rhs = DVector::from_fn(k, |a, _| {
            let ba = qp.bounds[active[a]];
            ba.sign * v0[ba.var] - ba.rhs
        });
        if let Some(wn) = s.lu().solve(&rhs) {
            if wn.iter().all(|&x| x >= -opts.activity_tol) {
                v = v0.clone();
                for (a, c) in cw.iter().enumerate() {
                    v -= c * wn[a];
                }
                w = wn.iter().map(|&x| x.max(0.0)).collect();
            }
        }
    } else {
        v = v0;
    }

    let z = v.rows(0, mdim).into_owned();
    let y = v.rows(mdim, ne).into_owned();
    let mut grad = &qp.h * &z + &qp.g + qp.e.transpose() * &y;
    for (a, &j) in active.iter().enumerate() {
        let b = qp.bounds[j];
        grad[b.var] += b.sign * w[a];
    }
    let stationarity = grad.amax();
    let gscale = 1.0 + qp.g.amax() + (&qp.h * &z).amax();
    if stationarity > opts.stationarity_tol * gscale {
        return Err(Error::NotConverged {
            iterations,
            reason: format!("stationarity residual {stationarity:.3e} above tolerance"),
        });
    }
    let eq_violation = (&qp.e * &z - &qp.e_rhs).amax();

    let point = LiftedPoint::from_data(z, spec.state_dim, spec.control_dim, spec.horizon)?;
    let mut mult = Multipliers::zeros(spec);
    for (k, row) in qp.rows.iter().enumerate() {
        match *row {
            Row::Dynamics { t, i } => mult.lambda[t][i] = y[k],
            Row::FixState { t, i } => mult.eta_x[t][i] += y[k],
            Row::FixControl { t, i } => mult.eta_u[t][i] += y[k],
            Row::StateFreq(r) => mult.mu_s[r] = y[k],
            Row::ControlFreq(r) => mult.mu_c[r] = y[k],
        }
    }
    let ubase = spec.state_dim * (spec.horizon + 1);
    for (a, &j) in active.iter().enumerate() {
        let b = qp.bounds[j];
        if b.var < ubase {
            mult.eta_x[b.var / spec.state_dim][b.var % spec.state_dim] += b.sign * w[a];
        } else {
            let k = b.var - ubase;
            mult.eta_u[k / spec.control_dim][k % spec.control_dim] += b.sign * w[a];
        }
    }

    let trajectory = point.to_trajectory();
    let objective = total_cost(spec, &trajectory)?;
    Ok(Solution {
        trajectory,
        multipliers: mult,
        objective,
        diagnostics: Diagnostics {
            method: "active-set".into(),
            iterations,
            outer_iterations: 0,
            constraint_violation: eq_violation,
            stationarity,
            active_bounds: active.len(),
            violation_history: Vec::new(),
            final_penalty: 0.0,
        },
    })
}
