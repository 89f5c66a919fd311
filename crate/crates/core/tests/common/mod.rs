//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use fcpmp::cones::AdmissibleSet;
use fcpmp::problem::{LinearDynamics, ProblemSpec, QuadraticCost, QuadraticTerminalCost};
use fcpmp::spectrum::{build_band_constraint, BannedBinSet};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

pub fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(xs)
}

/// `|a - b|_inf / max(1, |a|_inf, |b|_inf)`.
pub fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax() / 1f64.max(a.amax()).max(b.amax())
}

/// Textbook `O(N^2)` DFT with the `exp(-2 pi i j t / N)` kernel.
pub fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|j| {
            x.iter()
                .enumerate()
                .map(|(t, &xt)| {
                    let angle = -2.0 * PI * ((j * t) % n) as f64 / n as f64;
                    xt * Complex64::new(angle.cos(), angle.sin())
                })
                .sum()
        })
        .collect()
}

/// Central-difference Jacobian of `f` at `x`.
pub fn central_jacobian(f: impl Fn(&DVector<f64>) -> DVector<f64>, x: &DVector<f64>, h: f64) -> DMatrix<f64> {
    let rows = f(x).len();
    let mut j = DMatrix::zeros(rows, x.len());
    for k in 0..x.len() {
        let step = h * (1.0 + x[k].abs());
        let mut xp = x.clone();
        xp[k] += step;
        let mut xm = x.clone();
        xm[k] -= step;
        j.set_column(k, &((f(&xp) - f(&xm)) / (2.0 * step)));
    }
    j
}

/// Forward difference `(f(x + h y) - f(x)) / h`.
pub fn one_sided(
    f: impl Fn(&DVector<f64>) -> DVector<f64>,
    x: &DVector<f64>,
    y: &DVector<f64>,
    h: f64,
) -> DVector<f64> {
    (f(&(x + y * h)) - f(x)) / h
}

fn random_matrix<R: Rng>(rng: &mut R, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.gen_range(-scale..scale))
}

fn random_spd<R: Rng>(rng: &mut R, n: usize, shift: f64) -> DMatrix<f64> {
    let m = random_matrix(rng, n, n, 1.0);
    &m * m.transpose() * 0.5 + DMatrix::identity(n, n) * shift
}

/// Symmetric random banned-bin set on one component (possibly empty).
pub fn random_banned<R: Rng>(rng: &mut R, len: usize, dim: usize) -> BannedBinSet {
    let mut banned = BannedBinSet::empty(len, dim);
    let k = rng.gen_range(0..dim);
    for _ in 0..rng.gen_range(0..=2) {
        let j = rng.gen_range(0..len);
        banned.bins[k].insert(j);
        banned.bins[k].insert((len - j) % len);
    }
    banned
}

/// Data of a random linear-quadratic instance, kept for the KKT oracle.
pub struct LqInstance {
    pub spec: ProblemSpec,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub q_lin: DVector<f64>,
    pub r_lin: DVector<f64>,
    pub qt: DMatrix<f64>,
    pub x0: DVector<f64>,
    pub state_box: Option<(DVector<f64>, DVector<f64>)>,
    pub control_box: (DVector<f64>, DVector<f64>),
    pub control_banned: BannedBinSet,
    pub state_banned: Option<BannedBinSet>,
}

/// Random instance with `n <= 3`, `m <= 2`, `T <= 6`, box bounds and banned bins.
pub fn random_lq<R: Rng>(rng: &mut R) -> LqInstance {
    let n = rng.gen_range(1..=3);
    let m = rng.gen_range(1..=2);
    let horizon = rng.gen_range(2..=6);
    let a = random_matrix(rng, n, n, 0.8);
    let b = random_matrix(rng, n, m, 1.0);
    let q = random_spd(rng, n, 0.0);
    let r = random_spd(rng, m, 0.5);
    let qt = random_spd(rng, n, 0.0);
    let q_lin = random_matrix(rng, n, 1, 2.0).column(0).into_owned();
    let r_lin = random_matrix(rng, m, 1, 2.0).column(0).into_owned();
    let x0 = random_matrix(rng, n, 1, 1.0).column(0).into_owned();

    let mut cost = QuadraticCost::new(q.clone(), r.clone());
    cost.q_lin = q_lin.clone();
    cost.r_lin = r_lin.clone();
    let ub = DVector::from_fn(m, |_, _| rng.gen_range(0.2..1.5));
    let control_box = (-&ub, ub);
    let mut spec = ProblemSpec::stationary(
        horizon,
        Arc::new(LinearDynamics::new(a.clone(), b.clone())),
        Arc::new(cost),
        Arc::new(QuadraticTerminalCost::new(qt.clone())),
    )
    .with_initial_state(x0.clone())
    .with_control_set(AdmissibleSet::Box {
        lo: control_box.0.clone(),
        hi: control_box.1.clone(),
    });
    let state_box = rng.gen_bool(0.7).then(|| {
        let hb = DVector::from_fn(n, |_, _| rng.gen_range(0.3..2.5));
        (-&hb, hb)
    });
    if let Some((lo, hi)) = &state_box {
        spec = spec.with_state_set(AdmissibleSet::Box {
            lo: lo.clone(),
            hi: hi.clone(),
        });
    }
    let control_banned = random_banned(rng, horizon, m);
    spec = spec.with_control_freq(build_band_constraint(horizon, m, &control_banned).unwrap());
    let state_banned = rng.gen_bool(0.3).then(|| random_banned(rng, horizon + 1, n));
    if let Some(sb) = &state_banned {
        spec = spec.with_state_freq(build_band_constraint(horizon + 1, n, sb).unwrap());
    }
    LqInstance {
        spec,
        a,
        b,
        q,
        r,
        q_lin,
        r_lin,
        qt,
        x0,
        state_box,
        control_box,
        control_banned,
        state_banned,
    }
}

/// Result of the dense KKT oracle.
pub struct KktSolution {
    pub z: DVector<f64>,
    /// Multipliers of `x_{t+1} - A x_t - B u_t = 0`, one vector per stage,
    /// or `None` when they are not unique (degenerate active constraints).
    pub lambda: Option<Vec<DVector<f64>>>,
}

/// Rows `cos(-2 pi j t / N)` and `sin(...)` for each banned representative.
fn band_rows(len: usize, banned: &BannedBinSet) -> Vec<(usize, Vec<f64>)> {
    let mut rows = Vec::new();
    for (k, set) in banned.bins.iter().enumerate() {
        for &j in set {
            if (len - j) % len < j {
                continue;
            }
            let angle = |t: usize| -2.0 * PI * (j * t) as f64 / len as f64;
            rows.push((k, (0..len).map(|t| angle(t).cos()).collect()));
            if j != 0 && 2 * j != len {
                rows.push((k, (0..len).map(|t| angle(t).sin()).collect()));
            }
        }
    }
    rows
}

/// Solve the lifted KKT system densely with the bounds active at `candidate`
/// treated as equalities, then exhibit multipliers with the correct bound
/// signs and verify stationarity and primal feasibility directly. Success
/// proves the oracle point is the global optimum of the convex QP.
pub fn kkt_oracle(inst: &LqInstance, candidate: &DVector<f64>) -> Result<KktSolution, String> {
    let spec = &inst.spec;
    let (n, m, horizon) = (spec.state_dim, spec.control_dim, spec.horizon);
    let dim = n * (horizon + 1) + m * horizon;
    let xo = |t: usize| t * n;
    let uo = |t: usize| n * (horizon + 1) + t * m;

    let mut h = DMatrix::zeros(dim, dim);
    let mut g = DVector::zeros(dim);
    for t in 0..horizon {
        h.view_mut((xo(t), xo(t)), (n, n)).copy_from(&inst.q);
        h.view_mut((uo(t), uo(t)), (m, m)).copy_from(&inst.r);
        g.rows_mut(xo(t), n).copy_from(&inst.q_lin);
        g.rows_mut(uo(t), m).copy_from(&inst.r_lin);
    }
    h.view_mut((xo(horizon), xo(horizon)), (n, n)).copy_from(&inst.qt);

    let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
    for t in 0..horizon {
        for i in 0..n {
            let mut e = DVector::zeros(dim);
            e[xo(t + 1) + i] = 1.0;
            for j in 0..n {
                e[xo(t) + j] -= inst.a[(i, j)];
            }
            for j in 0..m {
                e[uo(t) + j] -= inst.b[(i, j)];
            }
            rows.push((e, 0.0));
        }
    }
    let n_dyn = rows.len();
    for (k, coeffs) in band_rows(horizon, &inst.control_banned) {
        let mut e = DVector::zeros(dim);
        for t in 0..horizon {
            e[uo(t) + k] = coeffs[t];
        }
        rows.push((e, 0.0));
    }
    if let Some(sb) = &inst.state_banned {
        for (k, coeffs) in band_rows(horizon + 1, sb) {
            let mut e = DVector::zeros(dim);
            for t in 0..=horizon {
                e[xo(t) + k] = coeffs[t];
            }
            rows.push((e, 0.0));
        }
    }
    for i in 0..n {
        let mut e = DVector::zeros(dim);
        e[i] = 1.0;
        rows.push((e, inst.x0[i]));
    }
    let n_eq = rows.len();

    // (coordinate, bound value, +1 for an upper bound, -1 for a lower bound)
    let mut bounds: Vec<(usize, f64, f64)> = Vec::new();
    for t in 0..horizon {
        for i in 0..m {
            bounds.push((uo(t) + i, inst.control_box.0[i], -1.0));
            bounds.push((uo(t) + i, inst.control_box.1[i], 1.0));
        }
    }
    if let Some((lo, hi)) = &inst.state_box {
        for t in 1..=horizon {
            for i in 0..n {
                bounds.push((xo(t) + i, lo[i], -1.0));
                bounds.push((xo(t) + i, hi[i], 1.0));
            }
        }
    }
    let active: Vec<(usize, f64, f64)> = bounds
        .iter()
        .copied()
        .filter(|&(c, b, _)| (candidate[c] - b).abs() <= 1e-7 * (1.0 + b.abs()))
        .collect();
    for &(c, b, _) in &active {
        let mut e = DVector::zeros(dim);
        e[c] = 1.0;
        rows.push((e, b));
    }

    // primal: minimum-norm solution of the (possibly rank-deficient) KKT system
    let k = rows.len();
    let mut kkt = DMatrix::zeros(dim + k, dim + k);
    let mut rhs = DVector::zeros(dim + k);
    kkt.view_mut((0, 0), (dim, dim)).copy_from(&h);
    rhs.rows_mut(0, dim).copy_from(&(-&g));
    for (r, (e, b)) in rows.iter().enumerate() {
        kkt.view_mut((dim + r, 0), (1, dim)).copy_from(&e.transpose());
        kkt.view_mut((0, dim + r), (dim, 1)).copy_from(e);
        rhs[dim + r] = *b;
    }
    let sol = kkt
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|e| e.to_string())?;
    let kkt_resid = (&kkt * &sol - &rhs).amax() / (1.0 + rhs.amax());
    if kkt_resid > 1e-9 {
        return Err(format!("inconsistent KKT system (residual {kkt_resid:.3e})"));
    }
    let z = sol.rows(0, dim).into_owned();
    for &(c, b, side) in &bounds {
        if side * (z[c] - b) > 1e-8 * (1.0 + b.abs()) {
            return Err(format!("oracle point violates a bound at coordinate {c}"));
        }
    }

    // dual: equality multipliers free, bound multipliers signed
    let target = -(&h * &z + &g);
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for (e, _) in &rows[..n_eq] {
        cols.push(e.clone());
        cols.push(-e);
    }
    for (idx, &(_, _, side)) in active.iter().enumerate() {
        cols.push(&rows[n_eq + idx].0 * side);
    }
    let a = DMatrix::from_columns(&cols);
    let c = fcpmp::linalg::nnls(&a, &target);
    let resid = (&a * &c - &target).amax() / (1.0 + target.amax());
    if resid > 1e-8 {
        return Err(format!(
            "no sign-feasible multipliers (stationarity residual {resid:.3e})"
        ));
    }
    let w = DVector::from_fn(n_eq, |r, _| c[2 * r] - c[2 * r + 1]);

    // the dynamics multipliers are unique iff no null vector of E' touches them
    let e_t = DMatrix::from_columns(&rows.iter().map(|(e, _)| e.clone()).collect::<Vec<_>>());
    let gram = (e_t.transpose() * &e_t).symmetric_eigen();
    let emax = gram.eigenvalues.amax().max(1.0);
    let mut unique = true;
    for r in 0..k {
        if gram.eigenvalues[r] <= 1e-12 * emax && gram.eigenvectors.column(r).rows(0, n_dyn).amax() > 1e-6 {
            unique = false;
        }
    }
    let lambda = unique.then(|| (0..horizon).map(|t| w.rows(t * n, n).into_owned()).collect());
    Ok(KktSolution { z, lambda })
}
