mod common;

use common::v;
use fcpmp::models::buck::{buck_problem, BuckParams};
use fcpmp::models::pendulum::{pendulum_problem, pendulum_problem_with_band, PendulumParams};
use fcpmp::models::{filter_baseline, trajectory_report, zoh_discretize};
use fcpmp::problem::simulate;
use fcpmp::solver::SolverOptions;
use fcpmp::spectrum::{ideal_filter, BannedBinSet};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Matrix exponential by scaling, a truncated Taylor series and repeated squaring.
fn expm_taylor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let norm = m.amax() * m.nrows() as f64;
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = m / 2f64.powi(squarings);
    let n = m.nrows();
    let mut term = DMatrix::identity(n, n);
    let mut sum = DMatrix::identity(n, n);
    for k in 1..=24 {
        term = &term * &scaled / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

fn random_system(rng: &mut ChaCha8Rng) -> (DMatrix<f64>, DMatrix<f64>, f64) {
    let n = rng.gen_range(1..=4);
    let m = rng.gen_range(1..=2);
    let ac = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-3.0..3.0));
    let bc = DMatrix::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0));
    (ac, bc, rng.gen_range(0.001..0.5))
}

#[test]
fn zoh_matches_taylor_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    for _ in 0..50 {
        let (ac, bc, ts) = random_system(&mut rng);
        let (n, m) = (ac.nrows(), bc.ncols());
        let (a, b) = zoh_discretize(&ac, &bc, ts).unwrap();
        let mut aug = DMatrix::zeros(n + m, n + m);
        aug.view_mut((0, 0), (n, n)).copy_from(&(&ac * ts));
        aug.view_mut((0, n), (n, m)).copy_from(&(&bc * ts));
        let e = expm_taylor(&aug);
        let scale = 1.0 + e.amax();
        assert!((a - e.view((0, 0), (n, n))).amax() <= 1e-10 * scale);
        assert!((b - e.view((0, n), (n, m))).amax() <= 1e-10 * scale);
    }
}

#[test]
fn zoh_composes_over_two_periods() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    for _ in 0..50 {
        let (ac, bc, ts) = random_system(&mut rng);
        let (a1, b1) = zoh_discretize(&ac, &bc, ts).unwrap();
        let (a2, b2) = zoh_discretize(&ac, &bc, 2.0 * ts).unwrap();
        // holding u for two periods: A(2h) = A(h)^2, B(2h) = A(h) B(h) + B(h)
        let scale = 1.0 + a2.amax();
        assert!((&a2 - &a1 * &a1).amax() <= 1e-9 * scale);
        assert!((&b2 - (&a1 * &b1 + &b1)).amax() <= 1e-9 * scale);
    }
}

#[test]
fn pendulum_instance_shape() {
    let p = PendulumParams::default();
    let spec = pendulum_problem(&p).unwrap();
    assert_eq!((spec.state_dim, spec.control_dim, spec.horizon), (4, 1, 240));
    assert_eq!(spec.control_freq.as_ref().unwrap().rows(), 47);
    assert!(spec.state_freq.is_none());
    assert!(pendulum_problem_with_band(&p, false).unwrap().control_freq.is_none());
    assert_eq!(p.banned_bins().bins[0].len(), 143 - 97 + 1);
    let bad = PendulumParams {
        ts: -1.0,
        ..PendulumParams::default()
    };
    assert!(pendulum_problem(&bad).is_err());
}

fn random_buck(rng: &mut ChaCha8Rng) -> BuckParams {
    BuckParams {
        r: rng.gen_range(1.0..20.0),
        l: rng.gen_range(0.01..0.1),
        r_d: 0.0,
        t_clk: rng.gen_range(1e-4..2e-3),
        i_ref: rng.gen_range(0.5..2.0),
    }
}

#[test]
fn buck_branches_agree_on_the_borderline() {
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    for _ in 0..100 {
        let p = random_buck(&mut rng);
        if p.check().is_err() {
            continue;
        }
        let vr = p.v_ref();
        // stay clear of the pole at V = i_ref R on both sides
        for (lo, hi) in [(0.0, 0.9 * vr), (1.1 * vr, 4.0 * vr)] {
            let mismatch = p.borderline_mismatch(lo, hi, 200);
            let scale = 1.0 + p.i_b(lo).abs().max(p.i_b(hi).abs());
            assert!(mismatch <= 1e-9 * scale, "{p:?}: {mismatch}");
        }
    }
}

#[test]
fn buck_borderline_current_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    for _ in 0..50 {
        let p = random_buck(&mut rng);
        let volt = rng.gen_range(0.0..3.0 * p.v_ref());
        let growth = (p.r * p.t_clk / p.l).exp();
        let want = (p.i_ref - volt / p.r) * growth + volt / p.r;
        assert!((p.i_b(volt) - want).abs() <= 1e-12 * (1.0 + want.abs()));
        assert!((p.v_b(p.i_b(volt)) - volt).abs() <= 1e-9 * (1.0 + volt));
        assert!((p.i_b(p.v_ref()) - p.i_ref).abs() <= 1e-12 * p.i_ref);
        let h = 1e-3;
        let fd = (p.i_b(volt + h) - p.i_b(volt - h)) / (2.0 * h);
        assert!((fd - p.i_b_slope()).abs() <= 1e-8 * (1.0 + fd.abs()));
    }
}

#[test]
fn buck_with_diode_resistance_is_rejected() {
    let p = BuckParams {
        r_d: 0.5,
        ..BuckParams::default()
    };
    assert!(buck_problem(p, 0.5, 0.9, 4).is_err());
    assert!(buck_problem(BuckParams::default(), 0.5, 0.9, 4).is_ok());
}

#[test]
fn buck_problem_dynamics_follow_the_branches() {
    let p = BuckParams::default();
    let spec = buck_problem(p, 0.5, 0.9, 3).unwrap();
    let below = spec.dynamics[0].eval(&v(&[0.0]), &v(&[20.0]));
    assert!((below[0] - p.affine_branch(0.0, 20.0)).abs() < 1e-15);
    let above = spec.dynamics[0].eval(&v(&[2.5]), &v(&[20.0]));
    assert!((above[0] - p.second_branch(2.5, 20.0)).abs() < 1e-15);
}

#[test]
fn filter_with_nothing_banned_reproduces_the_solution() {
    let p = PendulumParams {
        horizon: 60,
        banned_lo: 25,
        banned_hi: 35,
        ..PendulumParams::default()
    };
    let spec = pendulum_problem(&p).unwrap();
    let rep = filter_baseline(&spec, &BannedBinSet::empty(60, 1), &SolverOptions::default()).unwrap();
    for (a, b) in rep.filtered.controls.iter().zip(&rep.unfiltered.controls) {
        assert!((a - b).amax() <= 1e-12);
    }
    let resim = simulate(&spec, &v(&p.initial_state), &rep.unfiltered.controls).unwrap();
    for (a, b) in rep.filtered.states.iter().zip(&resim) {
        assert!((a - b).amax() <= 1e-9 * (1.0 + b.amax()));
    }
}

#[test]
fn filtering_an_already_filtered_control_changes_nothing() {
    let p = PendulumParams {
        horizon: 60,
        banned_lo: 25,
        banned_hi: 35,
        ..PendulumParams::default()
    };
    let spec = pendulum_problem(&p).unwrap();
    let banned = p.banned_bins();
    let rep = filter_baseline(&spec, &banned, &SolverOptions::default()).unwrap();
    let again = ideal_filter(&rep.filtered.controls, &banned).unwrap();
    for (a, b) in again.iter().zip(&rep.filtered.controls) {
        assert!((a - b).amax() <= 1e-12);
    }
    // the report re-simulates the filtered control exactly
    let x0 = v(&p.initial_state);
    let states = simulate(&spec, &x0, &rep.filtered.controls).unwrap();
    assert_eq!(states, rep.filtered.states);
    let report = trajectory_report(&spec, &rep.filtered).unwrap();
    assert_eq!(report.max_abs_control, rep.filtered_report.max_abs_control);
}
