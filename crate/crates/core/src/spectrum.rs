//! DFT machinery for band constraints on trajectories.
//!
//! A real signal `v_0..v_{K-1}` (each `v_t` a vector of `dim` components) is
//! constrained by forcing selected DFT bins of each component to vanish. The
//! complex condition is split into real and imaginary rows of the DFT matrix,
//! keeping one representative per conjugate pair so the row set has full
//! rank. Bins are zero-based: bin `j` has frequency `2 pi j / K`.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};

/// Affine map `v |-> offset + sum_t G_t v_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyConstraint {
    /// One `rows x dim` matrix per time index.
    pub stage_maps: Vec<DMatrix<f64>>,
    pub offset: DVector<f64>,
}

impl FrequencyConstraint {
    pub fn rows(&self) -> usize {
        self.offset.len()
    }

    pub fn signal_len(&self) -> usize {
        self.stage_maps.len()
    }

    pub fn dim(&self) -> usize {
        self.stage_maps.first().map_or(0, |g| g.ncols())
    }

    /// Shift the offset so that `reference` satisfies the constraint exactly.
    pub fn anchored_at(mut self, reference: &[DVector<f64>]) -> Result<Self> {
        let r = constraint_residual(&self, reference)?;
        self.offset -= r;
        Ok(self)
    }
}

/// Banned bins, per signal component.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BannedBinSet {
    pub signal_len: usize,
    pub bins: Vec<BTreeSet<usize>>,
}

impl BannedBinSet {
    pub fn empty(signal_len: usize, dim: usize) -> Self {
        Self {
            signal_len,
            bins: vec![BTreeSet::new(); dim],
        }
    }

    /// The same bins banned on every component.
    pub fn uniform(signal_len: usize, dim: usize, bins: impl IntoIterator<Item = usize>) -> Self {
        let set: BTreeSet<usize> = bins.into_iter().collect();
        Self {
            signal_len,
            bins: vec![set; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.iter().all(|b| b.is_empty())
    }

    /// Every banned bin must be in range and have its conjugate partner banned.
    pub fn check(&self) -> Result<()> {
        let n = self.signal_len;
        for (k, set) in self.bins.iter().enumerate() {
            for &j in set {
                if j >= n {
                    return Err(Error::InvalidProblem(format!(
                        "component {k}: bin {j} out of range for signal length {n}"
                    )));
                }
                let partner = (n - j) % n;
                if !set.contains(&partner) {
                    return Err(Error::AsymmetricBins {
                        component: k,
                        bin: j,
                        partner,
                    });
                }
            }
        }
        Ok(())
    }

    /// Number of real constraint rows the band map will have.
    pub fn row_count(&self) -> usize {
        let n = self.signal_len;
        self.bins
            .iter()
            .map(|set| {
                set.iter()
                    .filter(|&&j| j <= (n - j) % n || j == 0)
                    .map(|&j| if is_self_conjugate(j, n) { 1 } else { 2 })
                    .sum::<usize>()
            })
            .sum()
    }
}

fn is_self_conjugate(j: usize, n: usize) -> bool {
    j == 0 || 2 * j == n
}

/// `N x N` DFT matrix with entry `(j, k) = exp(-2 pi i j k / N)`.
pub fn dft_matrix(n: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(n, n, |j, k| {
        // reduce jk mod n first to keep the angle small
        let e = ((j * k) % n) as f64;
        Complex64::from_polar(1.0, -2.0 * PI * e / n as f64)
    })
}

fn fft_in_place(buf: &mut [Complex64], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(buf.len())
    } else {
        planner.plan_fft_forward(buf.len())
    };
    fft.process(buf);
}

/// DFT of a complex sequence (`O(K log K)`).
pub fn dft(values: &[Complex64]) -> Vec<Complex64> {
    let mut buf = values.to_vec();
    if !buf.is_empty() {
        fft_in_place(&mut buf, false);
    }
    buf
}

/// DFT of component `k` (zero-based) of a vector-valued signal.
pub fn component_spectrum(signal: &[DVector<f64>], k: usize) -> Result<Vec<Complex64>> {
    let dim = signal.first().map_or(0, |v| v.len());
    if k >= dim {
        return Err(Error::dim("spectrum component index bound", dim, k));
    }
    let seq: Vec<Complex64> = signal.iter().map(|v| Complex64::new(v[k], 0.0)).collect();
    Ok(dft(&seq))
}

/// Real band-constraint map whose zero set is exactly "all banned bins vanish".
///
/// For each component and each conjugate pair `{j, N-j}` of banned bins the
/// representative `min(j, N-j)` contributes the row `Re F[j]` and, unless the
/// bin is self-conjugate (DC or Nyquist), the row `Im F[j]`.
pub fn build_band_constraint(signal_len: usize, dim: usize, banned: &BannedBinSet) -> Result<FrequencyConstraint> {
    if banned.dim() != dim {
        return Err(Error::dim("banned bin components", dim, banned.dim()));
    }
    if banned.signal_len != signal_len {
        return Err(Error::dim("banned bin signal length", signal_len, banned.signal_len));
    }
    banned.check()?;
    let n = signal_len;

    // (component, coefficient row over time)
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for (k, set) in banned.bins.iter().enumerate() {
        for &j in set {
            let partner = (n - j) % n;
            if partner < j {
                continue;
            }
            let angle = |t: usize| -2.0 * PI * ((j * t) % n) as f64 / n as f64;
            rows.push((k, (0..n).map(|t| angle(t).cos()).collect()));
            if !is_self_conjugate(j, n) {
                rows.push((k, (0..n).map(|t| angle(t).sin()).collect()));
            }
        }
    }

    let ell = rows.len();
    let stage_maps = (0..n)
        .map(|t| {
            let mut g = DMatrix::zeros(ell, dim);
            for (r, (k, coeffs)) in rows.iter().enumerate() {
                g[(r, *k)] = coeffs[t];
            }
            g
        })
        .collect();
    Ok(FrequencyConstraint {
        stage_maps,
        offset: DVector::zeros(ell),
    })
}

/// `offset + sum_t G_t v_t`.
pub fn constraint_residual(fc: &FrequencyConstraint, signal: &[DVector<f64>]) -> Result<DVector<f64>> {
    if signal.len() != fc.signal_len() {
        return Err(Error::dim(
            "frequency-constrained signal length",
            fc.signal_len(),
            signal.len(),
        ));
    }
    let mut r = fc.offset.clone();
    for (t, (g, v)) in fc.stage_maps.iter().zip(signal).enumerate() {
        if v.len() != g.ncols() {
            return Err(Error::dim(format!("signal sample {t}"), g.ncols(), v.len()));
        }
        r.gemv(1.0, g, v, 1.0);
    }
    Ok(r)
}

/// Zero the banned bins of every component and return the real part of the inverse DFT.
pub fn ideal_filter(signal: &[DVector<f64>], banned: &BannedBinSet) -> Result<Vec<DVector<f64>>> {
    banned.check()?;
    let n = signal.len();
    if banned.signal_len != n {
        return Err(Error::dim("banned bin signal length", n, banned.signal_len));
    }
    let dim = signal.first().map_or(0, |v| v.len());
    if banned.dim() != dim {
        return Err(Error::dim("banned bin components", dim, banned.dim()));
    }
    let mut out = signal.to_vec();
    for k in 0..dim {
        if banned.bins[k].is_empty() {
            continue;
        }
        let mut spec = component_spectrum(signal, k)?;
        for &j in &banned.bins[k] {
            spec[j] = Complex64::new(0.0, 0.0);
        }
        fft_in_place(&mut spec, true);
        for (t, v) in out.iter_mut().enumerate() {
            v[k] = spec[t].re / n as f64;
        }
    }
    Ok(out)
}

/// Largest banned-bin magnitude and largest overall magnitude across components.
pub fn band_leakage(signal: &[DVector<f64>], banned: &BannedBinSet) -> Result<(f64, f64)> {
    let dim = banned.dim();
    let mut worst_banned = 0.0_f64;
    let mut worst_all = 0.0_f64;
    for k in 0..dim {
        let spec = component_spectrum(signal, k)?;
        for (j, c) in spec.iter().enumerate() {
            worst_all = worst_all.max(c.norm());
            if banned.bins[k].contains(&j) {
                worst_banned = worst_banned.max(c.norm());
            }
        }
    }
    Ok((worst_banned, worst_all))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumRow {
    pub component: usize,
    pub bin: usize,
    pub omega: f64,
    pub re: f64,
    pub im: f64,
    pub magnitude: f64,
}

/// Tabulate every component's spectrum.
pub fn spectrum_table(signal: &[DVector<f64>]) -> Result<Vec<SpectrumRow>> {
    let n = signal.len();
    let dim = signal.first().map_or(0, |v| v.len());
    let mut rows = Vec::with_capacity(n * dim);
    for k in 0..dim {
        for (j, c) in component_spectrum(signal, k)?.into_iter().enumerate() {
            rows.push(SpectrumRow {
                component: k + 1,
                bin: j,
                omega: 2.0 * PI * j as f64 / n as f64,
                re: c.re,
                im: c.im,
                magnitude: c.norm(),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_signal(vals: &[f64]) -> Vec<DVector<f64>> {
        vals.iter().map(|&v| DVector::from_element(1, v)).collect()
    }

    #[test]
    fn dft_matrix_small_cases() {
        let f1 = dft_matrix(1);
        assert_eq!(f1[(0, 0)], Complex64::new(1.0, 0.0));

        let f2 = dft_matrix(2);
        let expect = [[1.0, 1.0], [1.0, -1.0]];
        for j in 0..2 {
            for k in 0..2 {
                assert!((f2[(j, k)] - Complex64::new(expect[j][k], 0.0)).norm() < 1e-15);
            }
        }

        let f4 = dft_matrix(4);
        let row1 = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, -1.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, 1.0),
        ];
        for k in 0..4 {
            assert!((f4[(1, k)] - row1[k]).norm() < 1e-15);
        }
    }

    #[test]
    fn constant_signal_is_dc_only() {
        let s = scalar_signal(&[2.5; 6]);
        let spec = component_spectrum(&s, 0).unwrap();
        assert!((spec[0] - Complex64::new(15.0, 0.0)).norm() < 1e-12);
        assert!(spec[1..].iter().all(|c| c.norm() < 1e-12));
    }

    #[test]
    fn impulse_spectrum_is_all_ones() {
        let s = scalar_signal(&[1.0, 0.0, 0.0, 0.0, 0.0]);
        let spec = component_spectrum(&s, 0).unwrap();
        assert!(spec.iter().all(|c| (c - Complex64::new(1.0, 0.0)).norm() < 1e-14));
    }

    #[test]
    fn dc_band_row() {
        let fc = build_band_constraint(4, 1, &BannedBinSet::uniform(4, 1, [0])).unwrap();
        assert_eq!(fc.rows(), 1);
        for t in 0..4 {
            assert_eq!(fc.stage_maps[t][(0, 0)], 1.0);
        }
        assert_eq!(fc.offset[0], 0.0);
    }

    #[test]
    fn first_harmonic_rows() {
        let fc = build_band_constraint(4, 1, &BannedBinSet::uniform(4, 1, [1, 3])).unwrap();
        assert_eq!(fc.rows(), 2);
        let re = [1.0, 0.0, -1.0, 0.0];
        let im = [0.0, -1.0, 0.0, 1.0];
        for t in 0..4 {
            assert!((fc.stage_maps[t][(0, 0)] - re[t]).abs() < 1e-15);
            assert!((fc.stage_maps[t][(1, 0)] - im[t]).abs() < 1e-15);
        }
    }

    #[test]
    fn asymmetric_bins_name_the_offender() {
        let err = build_band_constraint(8, 1, &BannedBinSet::uniform(8, 1, [1, 2, 6])).unwrap_err();
        match err {
            Error::AsymmetricBins { bin, partner, .. } => {
                assert_eq!(bin, 1);
                assert_eq!(partner, 7);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pendulum_band_has_47_rows() {
        let banned = BannedBinSet::uniform(240, 1, 97..=143);
        assert_eq!(banned.row_count(), 47);
        let fc = build_band_constraint(240, 1, &banned).unwrap();
        assert_eq!(fc.rows(), 47);
    }

    #[test]
    fn filter_with_nothing_banned_is_identity() {
        let s = scalar_signal(&[0.3, -1.0, 2.0, 0.5]);
        let out = ideal_filter(&s, &BannedBinSet::empty(4, 1)).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn filter_keeping_only_dc_returns_mean() {
        let vals = [0.3, -1.0, 2.0, 0.5, 1.2];
        let s = scalar_signal(&vals);
        let out = ideal_filter(&s, &BannedBinSet::uniform(5, 1, 1..5)).unwrap();
        let mean = vals.iter().sum::<f64>() / 5.0;
        assert!(out.iter().all(|v| (v[0] - mean).abs() < 1e-14));
    }

    #[test]
    fn impulse_residual_against_first_harmonic() {
        let fc = build_band_constraint(4, 1, &BannedBinSet::uniform(4, 1, [1, 3])).unwrap();
        let r = constraint_residual(&fc, &scalar_signal(&[1.0, 0.0, 0.0, 0.0])).unwrap();
        assert!((r[0] - 1.0).abs() < 1e-15);
        assert!(r[1].abs() < 1e-15);
    }

    #[test]
    fn zero_signal_zero_residual() {
        let fc = build_band_constraint(6, 2, &BannedBinSet::uniform(6, 2, [2, 3, 4])).unwrap();
        let r = constraint_residual(&fc, &vec![DVector::zeros(2); 6]).unwrap();
        assert_eq!(r.amax(), 0.0);
    }

    #[test]
    fn anchored_constraint_is_satisfied_by_reference() {
        let banned = BannedBinSet::uniform(6, 1, [0]);
        let reference = scalar_signal(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let fc = build_band_constraint(6, 1, &banned)
            .unwrap()
            .anchored_at(&reference)
            .unwrap();
        assert!(constraint_residual(&fc, &reference).unwrap().amax() < 1e-12);
        assert!((fc.offset[0] + 21.0).abs() < 1e-12);
    }
}
