mod common;

use std::sync::Arc;

use common::{random_lq, v};
use fcpmp::models::buck::{BuckDynamics, BuckParams};
use fcpmp::models::example2::{example2_problem, Example2Dynamics};
use fcpmp::problem::{
    numeric_one_sided, simulate, total_cost, validate, Dynamics, IssueKind, LinearDynamics, QuadraticCost,
    QuadraticTerminalCost,
};
use fcpmp::{ProblemSpec, Trajectory};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_controls(rng: &mut ChaCha8Rng, horizon: usize, m: usize) -> Vec<DVector<f64>> {
    (0..horizon)
        .map(|_| DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0)))
        .collect()
}

#[test]
fn rollout_of_random_lq_matches_loop_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..20 {
        let inst = random_lq(&mut rng);
        let controls = random_controls(&mut rng, inst.spec.horizon, inst.spec.control_dim);
        let states = simulate(&inst.spec, &inst.x0, &controls).unwrap();
        let mut x = inst.x0.clone();
        for (t, u) in controls.iter().enumerate() {
            assert!((&states[t] - &x).amax() <= 1e-14);
            let mut next = DVector::zeros(x.len());
            for i in 0..x.len() {
                for j in 0..x.len() {
                    next[i] += inst.a[(i, j)] * x[j];
                }
                for j in 0..u.len() {
                    next[i] += inst.b[(i, j)] * u[j];
                }
            }
            x = next;
        }
        assert!((&states[inst.spec.horizon] - &x).amax() <= 1e-13);
    }
}

#[test]
fn total_cost_of_random_lq_matches_summation_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..20 {
        let inst = random_lq(&mut rng);
        let controls = random_controls(&mut rng, inst.spec.horizon, inst.spec.control_dim);
        let states = simulate(&inst.spec, &inst.x0, &controls).unwrap();
        let quad = |m: &DMatrix<f64>, x: &DVector<f64>| {
            let mut s = 0.0;
            for i in 0..x.len() {
                for j in 0..x.len() {
                    s += x[i] * m[(i, j)] * x[j];
                }
            }
            0.5 * s
        };
        let mut want = 0.0;
        for (t, u) in controls.iter().enumerate() {
            want += quad(&inst.q, &states[t]) + quad(&inst.r, u) + inst.q_lin.dot(&states[t]) + inst.r_lin.dot(u);
        }
        want += quad(&inst.qt, &states[inst.spec.horizon]);
        let got = total_cost(&inst.spec, &Trajectory { states, controls }).unwrap();
        assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()));
    }
}

#[test]
fn example2_hand_cost() {
    let spec = example2_problem(v(&[1.0, 1.0]), 1);
    let traj = Trajectory {
        states: vec![v(&[1.0, 1.0]), v(&[0.0, 2f64.sqrt()])],
        controls: vec![v(&[1.0])],
    };
    assert!((total_cost(&spec, &traj).unwrap() - 5.0).abs() < 1e-14);
    assert_eq!(
        simulate(&spec, &v(&[1.0, 1.0]), &traj.controls).unwrap()[1],
        v(&[0.0, 2f64.sqrt()])
    );
}

#[test]
fn rollout_and_cost_are_bit_reproducible() {
    let spec = example2_problem(v(&[0.3, -0.7]), 5);
    let controls: Vec<_> = (0..5).map(|t| v(&[0.1 * t as f64])).collect();
    let a = simulate(&spec, &v(&[0.3, -0.7]), &controls).unwrap();
    let b = simulate(&spec, &v(&[0.3, -0.7]), &controls).unwrap();
    assert_eq!(a, b);
    let ca = total_cost(
        &spec,
        &Trajectory {
            states: a,
            controls: controls.clone(),
        },
    )
    .unwrap();
    let cb = total_cost(&spec, &Trajectory { states: b, controls }).unwrap();
    assert_eq!(ca.to_bits(), cb.to_bits());
}

#[test]
fn dynamics_dimension_mismatch_is_reported() {
    let mut spec = example2_problem(v(&[1.0, 1.0]), 2);
    spec.dynamics[1] = Arc::new(LinearDynamics::new(DMatrix::identity(3, 3), DMatrix::zeros(3, 1)));
    let rep = validate(&spec);
    assert!(rep
        .issues
        .iter()
        .any(|i| i.kind == IssueKind::Dimension && i.message.contains("dynamics[1]")));
}

#[test]
fn well_formed_lq_validates() {
    let spec = ProblemSpec::stationary(
        3,
        Arc::new(LinearDynamics::new(DMatrix::identity(2, 2), DMatrix::zeros(2, 1))),
        Arc::new(QuadraticCost::diagonal(2, 1, 1.0, 1.0)),
        Arc::new(QuadraticTerminalCost::zero(2)),
    );
    assert!(validate(&spec).is_valid());
}

type OracleCase = (Arc<dyn Dynamics>, DVector<f64>, DVector<f64>);

/// Sample points for the nonsmooth oracles, including their kinks.
fn oracle_cases(rng: &mut ChaCha8Rng) -> Vec<OracleCase> {
    let p = BuckParams::default();
    let buck: Arc<dyn Dynamics> = Arc::new(BuckDynamics { params: p });
    let ex2: Arc<dyn Dynamics> = Arc::new(Example2Dynamics);
    let mut cases = vec![(ex2.clone(), v(&[0.0, 0.0]), v(&[0.4]))];
    for _ in 0..20 {
        cases.push((
            ex2.clone(),
            DVector::from_fn(2, |_, _| rng.gen_range(-2.0..2.0)),
            v(&[rng.gen_range(0.0..1.0)]),
        ));
        let volt = rng.gen_range(15.0..60.0);
        cases.push((buck.clone(), v(&[rng.gen_range(0.0..2.0)]), v(&[volt])));
        cases.push((buck.clone(), v(&[p.i_b(volt)]), v(&[volt])));
    }
    cases
}

#[test]
fn directional_derivatives_are_positively_homogeneous() {
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    for (f, x, u) in oracle_cases(&mut rng) {
        for _ in 0..10 {
            let y = DVector::from_fn(x.len(), |_, _| rng.gen_range(-1.0..1.0));
            let w = DVector::from_fn(u.len(), |_, _| rng.gen_range(-1.0..1.0));
            for a in [0.1, 2.0, 7.5] {
                let dx = f.ddx(&x, &u, &y);
                let dxa = f.ddx(&x, &u, &(&y * a));
                assert!((&dxa - &dx * a).amax() <= 1e-10 * (1.0 + (&dx * a).amax()));
                let du = f.ddu(&x, &u, &w);
                let dua = f.ddu(&x, &u, &(&w * a));
                assert!((&dua - &du * a).amax() <= 1e-10 * (1.0 + (&du * a).amax()));
            }
        }
    }
}

#[test]
fn directional_derivatives_match_one_sided_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for (f, x, u) in oracle_cases(&mut rng) {
        for _ in 0..10 {
            let y = DVector::from_fn(x.len(), |_, _| rng.gen_range(-1.0..1.0));
            let w = DVector::from_fn(u.len(), |_, _| rng.gen_range(-1.0..1.0));
            let exact = f.ddx(&x, &u, &y);
            // Richardson-extrapolated differences at three step sizes must agree with the oracle
            for theta in [1e-4, 1e-5, 1e-6] {
                let num = numeric_one_sided(|p| f.eval(p, &u), &x, &y, theta);
                assert!(
                    (&num - &exact).amax() <= 1e-5 * (1.0 + exact.amax()),
                    "ddx {x} {u} {y}: {num} vs {exact}"
                );
            }
            let exact = f.ddu(&x, &u, &w);
            for theta in [1e-4, 1e-5, 1e-6] {
                let num = numeric_one_sided(|q| f.eval(&x, q), &u, &w, theta);
                assert!(
                    (&num - &exact).amax() <= 1e-5 * (1.0 + exact.amax()),
                    "ddu {x} {u} {w}: {num} vs {exact}"
                );
            }
        }
    }
}

#[test]
fn jacobians_agree_with_directional_derivatives_where_smooth() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for (f, x, u) in oracle_cases(&mut rng) {
        let y = DVector::from_fn(x.len(), |_, _| rng.gen_range(-1.0..1.0));
        let w = DVector::from_fn(u.len(), |_, _| rng.gen_range(-1.0..1.0));
        match f.jac_x(&x, &u) {
            Some(j) => {
                assert!(f.smooth_in_x(&x, &u));
                assert!((j * &y - f.ddx(&x, &u, &y)).amax() <= 1e-12 * (1.0 + y.amax()));
            }
            None => assert!(!f.smooth_in_x(&x, &u)),
        }
        match f.jac_u(&x, &u) {
            Some(j) => {
                assert!(f.smooth_in_u(&x, &u));
                assert!((j * &w - f.ddu(&x, &u, &w)).amax() <= 1e-12 * (1.0 + w.amax()));
            }
            None => assert!(!f.smooth_in_u(&x, &u)),
        }
    }
}

#[test]
fn oracles_are_locally_lipschitz_on_a_probe_box() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    // Example 2 on [-2, 2]^2 x [0, 1]: |d f| <= |y|(1 + 2u) + 2|x||w| bounds the ratio by 1 + 2 + 2 sqrt(8)
    let bound = 1.0 + 2.0 + 2.0 * 8f64.sqrt();
    let mut worst: f64 = 0.0;
    for _ in 0..5000 {
        let x1 = DVector::from_fn(2, |_, _| rng.gen_range(-2.0..2.0));
        let x2 = DVector::from_fn(2, |_, _| rng.gen_range(-2.0..2.0));
        let u1 = v(&[rng.gen_range(0.0..1.0)]);
        let u2 = v(&[rng.gen_range(0.0..1.0)]);
        let num = (Example2Dynamics.eval(&x1, &u1) - Example2Dynamics.eval(&x2, &u2)).norm();
        let den = ((&x1 - &x2).norm_squared() + (&u1 - &u2).norm_squared()).sqrt();
        worst = worst.max(num / den);
    }
    assert!(worst.is_finite() && worst <= bound, "{worst}");
}
