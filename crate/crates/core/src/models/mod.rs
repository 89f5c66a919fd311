//! Ready-made problem instances and the discretization they rely on.

pub mod buck;
pub mod example2;
pub mod filter;
pub mod pendulum;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub use filter::{filter_baseline, trajectory_report, FilterReport, TrajectoryReport};

/// Zero-order-hold discretization `(A, B)` of `x' = Ac x + Bc u` with period `ts`.
///
/// Both blocks come from one exponential of the augmented generator
/// `[[Ac, Bc], [0, 0]] * ts`.
pub fn zoh_discretize(ac: &DMatrix<f64>, bc: &DMatrix<f64>, ts: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if !(ts > 0.0 && ts.is_finite()) {
        return Err(Error::InvalidProblem(format!("sample time {ts} must be positive")));
    }
    let n = ac.nrows();
    if ac.ncols() != n {
        return Err(Error::dim("continuous state matrix columns", n, ac.ncols()));
    }
    if bc.nrows() != n {
        return Err(Error::dim("continuous input matrix rows", n, bc.nrows()));
    }
    let m = bc.ncols();
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(ac * ts));
    aug.view_mut((0, n), (n, m)).copy_from(&(bc * ts));
    let e = aug.exp();
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            stage: 0,
            what: "matrix exponential in discretization".into(),
        });
    }
    Ok((e.view((0, 0), (n, n)).into_owned(), e.view((0, n), (n, m)).into_owned()))
}
