//! Planar system `f(x, u) = (x_1 (1 - u), |x| u)`, nonsmooth at the origin.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::cones::AdmissibleSet;
use crate::problem::{Dynamics, ProblemSpec, QuadraticCost, QuadraticTerminalCost};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Example2Dynamics;

impl Dynamics for Example2Dynamics {
    fn state_dim(&self) -> usize {
        2
    }

    fn control_dim(&self) -> usize {
        1
    }

    fn eval(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![x[0] * (1.0 - u[0]), x.norm() * u[0]])
    }

    fn ddx(&self, x: &DVector<f64>, u: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let r = x.norm();
        // the one-sided derivative of |x| at the origin is |y|
        let dnorm = if r > 0.0 { x.dot(y) / r } else { y.norm() };
        DVector::from_vec(vec![y[0] * (1.0 - u[0]), dnorm * u[0]])
    }

    fn ddu(&self, x: &DVector<f64>, _u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![-x[0] * w[0], x.norm() * w[0]])
    }

    fn smooth_in_x(&self, x: &DVector<f64>, _u: &DVector<f64>) -> bool {
        x.norm() > 0.0
    }

    fn smooth_in_u(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> bool {
        true
    }

    fn jac_x(&self, x: &DVector<f64>, u: &DVector<f64>) -> Option<DMatrix<f64>> {
        let r = x.norm();
        (r > 0.0).then(|| DMatrix::from_row_slice(2, 2, &[1.0 - u[0], 0.0, x[0] / r * u[0], x[1] / r * u[0]]))
    }

    fn jac_u(&self, x: &DVector<f64>, _u: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_row_slice(2, 1, &[-x[0], x.norm()]))
    }

    /// At the origin the designated element of the generalized gradient of `|x|` is zero.
    fn branch_jacobians(&self, x: &DVector<f64>, u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let jx = self
            .jac_x(x, u)
            .unwrap_or_else(|| DMatrix::from_row_slice(2, 2, &[1.0 - u[0], 0.0, 0.0, 0.0]));
        (jx, DMatrix::from_row_slice(2, 1, &[-x[0], x.norm()]))
    }

    fn kink_directions_x(&self, x: &DVector<f64>, _u: &DVector<f64>) -> Vec<DVector<f64>> {
        if x.norm() > 0.0 {
            return Vec::new();
        }
        let s = std::f64::consts::FRAC_1_SQRT_2;
        [(s, s), (s, -s), (-s, s), (-s, -s)]
            .iter()
            .map(|&(a, b)| DVector::from_vec(vec![a, b]))
            .collect()
    }
}

/// Stage cost `|x|^2 + u^2`, terminal cost `|x|^2`, `u in [0, 1]`, `x_0` fixed, other states free.
pub fn example2_problem(x0: DVector<f64>, horizon: usize) -> ProblemSpec {
    ProblemSpec::stationary(
        horizon,
        Arc::new(Example2Dynamics),
        Arc::new(QuadraticCost::diagonal(2, 1, 1.0, 1.0)),
        Arc::new(QuadraticTerminalCost::new(DMatrix::identity(2, 2) * 2.0)),
    )
    .with_initial_state(x0)
    .with_control_set(AdmissibleSet::Box {
        lo: DVector::zeros(1),
        hi: DVector::from_element(1, 1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn origin_derivative() {
        let d = Example2Dynamics.ddx(&v(&[0.0, 0.0]), &v(&[1.0]), &v(&[3.0, 4.0]));
        assert_eq!(d, v(&[0.0, 5.0]));
    }

    #[test]
    fn origin_derivative_is_positively_homogeneous() {
        let (x, u, y) = (v(&[0.0, 0.0]), v(&[0.3]), v(&[-1.0, 2.0]));
        let d1 = Example2Dynamics.ddx(&x, &u, &y);
        let d2 = Example2Dynamics.ddx(&x, &u, &(&y * 2.0));
        assert!((d2 - d1 * 2.0).amax() < 1e-15);
    }

    #[test]
    fn jacobian_matches_directional_derivative_off_origin() {
        let (x, u, y) = (v(&[0.4, -1.2]), v(&[0.7]), v(&[0.3, 0.9]));
        let j = Example2Dynamics.jac_x(&x, &u).unwrap();
        assert!((j * &y - Example2Dynamics.ddx(&x, &u, &y)).amax() < 1e-15);
    }
}
