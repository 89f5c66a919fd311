//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn all_finite(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Nonnegative least squares `min ||A c - b||, c >= 0` (Lawson–Hanson).
///
/// Returns the coefficient vector. Columns of `a` are the generators.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let k = a.ncols();
    let mut x = DVector::zeros(k);
    if k == 0 {
        return x;
    }
    let tol = 1e-13 * (1.0 + a.norm()) * (1.0 + b.norm());
    let mut passive = vec![false; k];
    let max_iter = 30 * k + 30;

    for _ in 0..max_iter {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..k)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].partial_cmp(&w[j]).unwrap());
        let Some(j) = candidate else { break };
        passive[j] = true;

        loop {
            let idx: Vec<usize> = (0..k).filter(|&i| passive[i]).collect();
            let sub = a.select_columns(&idx);
            let z_sub = least_squares(&sub, b);
            if z_sub.iter().all(|&v| v > 0.0) {
                for (p, &i) in idx.iter().enumerate() {
                    x[i] = z_sub[p];
                }
                break;
            }
            // step back toward feasibility
            let mut alpha = 1.0_f64;
            for (p, &i) in idx.iter().enumerate() {
                if z_sub[p] <= 0.0 {
                    let denom = x[i] - z_sub[p];
                    if denom > 0.0 {
                        alpha = alpha.min(x[i] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            for (p, &i) in idx.iter().enumerate() {
                x[i] += alpha * (z_sub[p] - x[i]);
                if x[i] <= tol {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    x
}

/// Minimum-norm least-squares solution via SVD.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let eps = 1e-13 * svd.singular_values.max().max(1.0);
    svd.solve(b, eps).unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

/// Euclidean projection of `v` onto the cone generated by the columns of `gens`.
pub fn project_onto_cone(gens: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
    if gens.ncols() == 0 {
        return DVector::zeros(v.len());
    }
    let c = nnls(gens, v);
    gens * c
}

/// Uniform sample on the unit sphere of dimension `d`.
pub fn random_unit<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Stack a list of equally sized column vectors into one vector.
pub fn stack(blocks: &[DVector<f64>]) -> DVector<f64> {
    let len = blocks.iter().map(|b| b.len()).sum();
    let mut out = DVector::zeros(len);
    let mut off = 0;
    for b in blocks {
        out.rows_mut(off, b.len()).copy_from(b);
        off += b.len();
    }
    out
}
