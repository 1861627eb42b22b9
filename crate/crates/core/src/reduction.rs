//! Noise-shape reconstruction and best-linear-estimator noise reduction for
//! inputs whose first `m` Laguerre coefficients are zero.
//!
//! With such an input the first `m` measured coefficients are pure distortion.
//! They give a rank-`m` reconstruction of the noise realization, and, when the
//! distortion covariance is known, the BLE of the remaining `L − m` coefficients.

use nalgebra::{DMatrix, DVector};

use crate::basis::{BasisMatrix, Spectrum};
use crate::error::{check_len, Error, Result};
use crate::linalg::{min_eigenvalue, symmetrize, JITTER_SCALE};

/// A spectrum split after its first `m` coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedSpectrum {
    pub head: Vec<f64>,
    pub tail: Vec<f64>,
    pub m: usize,
}

impl PartitionedSpectrum {
    pub fn split(spectrum: &Spectrum, m: usize) -> Result<Self> {
        check_split(m, spectrum.len())?;
        let (head, tail) = spectrum.as_slice().split_at(m);
        Ok(Self {
            head: head.to_vec(),
            tail: tail.to_vec(),
            m,
        })
    }

    pub fn join(&self, p: f64) -> Spectrum {
        Spectrum::new([self.head.as_slice(), self.tail.as_slice()].concat(), p)
    }
}

fn check_split(m: usize, len: usize) -> Result<()> {
    if m >= 1 && m < len {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "partition index m = {m} must satisfy 1 ≤ m < L = {len}"
        )))
    }
}

/// The first `m` coefficients of the measured spectrum; with an input delayed by
/// `m` in the Laguerre domain these are exactly `e_0 .. e_{m−1}`.
pub fn extract_head_distortion(y_hat: &Spectrum, m: usize) -> Result<Vec<f64>> {
    Ok(PartitionedSpectrum::split(y_hat, m)?.head)
}

/// `Φ_m Ξ_p y`: rank-`m` reconstruction of the noise realization from the head.
pub fn reconstruct_noise_plain(y_meas: &[f64], basis: &BasisMatrix, m: usize) -> Result<Vec<f64>> {
    check_split(m, basis.len())?;
    check_len(basis.horizon(), y_meas.len(), "measurement length")?;
    let head = basis.analyze_rows(y_meas, m);
    basis.synthesize_coefficients(&head)
}

/// Conditional (Schur-complement) estimator of the tail distortion given the head.
#[derive(Debug, Clone)]
pub struct BleModel {
    pub m: usize,
    pub sigma11: DMatrix<f64>,
    pub sigma21: DMatrix<f64>,
    pub sigma22: DMatrix<f64>,
    /// `Σ21 Σ11⁻¹`, `(L − m) × m`.
    pub gain: DMatrix<f64>,
    /// `Σ22 − Σ21 Σ11⁻¹ Σ12`.
    pub err_cov: DMatrix<f64>,
}

impl BleModel {
    pub fn len(&self) -> usize {
        self.m + self.sigma22.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `Σ21 Σ11⁻¹ Σ12`, the covariance of the estimate itself.
    pub fn estimate_cov(&self) -> DMatrix<f64> {
        symmetrize(&(&self.gain * self.sigma21.transpose()))
    }
}

pub fn fit_ble(sigma_lag: &DMatrix<f64>, m: usize) -> Result<BleModel> {
    let l = sigma_lag.nrows();
    check_len(l, sigma_lag.ncols(), "Σ_lag must be square")?;
    check_split(m, l)?;
    let sigma = symmetrize(sigma_lag);
    let sigma11 = sigma.view((0, 0), (m, m)).into_owned();
    let sigma21 = sigma.view((m, 0), (l - m, m)).into_owned();
    let sigma22 = sigma.view((m, m), (l - m, l - m)).into_owned();

    let chol = match sigma11.clone().cholesky() {
        Some(c) => c,
        None => {
            let jitter = JITTER_SCALE * sigma11.trace().abs() / m as f64;
            if jitter.is_nan() || jitter <= 0.0 {
                return Err(Error::Singular("head covariance Σ11 is zero"));
            }
            let mut repaired = sigma11.clone();
            for i in 0..m {
                repaired[(i, i)] += jitter;
            }
            repaired.cholesky().ok_or(Error::Singular(
                "head covariance Σ11 is not repairable by jitter",
            ))?
        }
    };
    // gain = Σ21 Σ11⁻¹  ⇔  Σ11 gainᵀ = Σ12
    let gain = chol.solve(&sigma21.transpose()).transpose();
    if gain.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("computing the BLE gain"));
    }
    let err_cov = symmetrize(&(&sigma22 - &gain * sigma21.transpose()));
    Ok(BleModel {
        m,
        sigma11,
        sigma21,
        sigma22,
        gain,
        err_cov,
    })
}

/// `gain · head`.
pub fn ble_tail(head: &[f64], ble: &BleModel) -> Result<Vec<f64>> {
    check_len(ble.m, head.len(), "head length")?;
    let h = DVector::from_column_slice(head);
    Ok((&ble.gain * h).iter().copied().collect())
}

/// Full distortion estimate `[head; gain · head]`.
pub fn estimate_distortion(head: &[f64], ble: &BleModel) -> Result<Vec<f64>> {
    let tail = ble_tail(head, ble)?;
    Ok([head, tail.as_slice()].concat())
}

/// Noise-reduced spectrum: head zeroed, tail minus its BLE.
pub fn reduce_noise(
    y_meas: &[f64],
    basis: &BasisMatrix,
    m: usize,
    ble: &BleModel,
) -> Result<Spectrum> {
    check_len(basis.len(), ble.len(), "BLE size vs basis length")?;
    check_len(ble.m, m, "BLE partition index")?;
    let y_hat = basis.analyze(y_meas)?;
    reduce_spectrum(&y_hat, ble)
}

/// [`reduce_noise`] applied to an already analysed spectrum.
pub fn reduce_spectrum(y_hat: &Spectrum, ble: &BleModel) -> Result<Spectrum> {
    check_len(ble.len(), y_hat.len(), "spectrum length vs BLE size")?;
    let m = ble.m;
    let mut out = y_hat.coefficients.clone();
    let correction = ble_tail(&out[..m], ble)?;
    for (o, c) in out[m..].iter_mut().zip(correction) {
        *o -= c;
    }
    out[..m].iter_mut().for_each(|v| *v = 0.0);
    Ok(Spectrum::new(out, y_hat.p))
}

/// `Φ_L [head; gain·head]`: time-domain noise estimate using the BLE tail.
pub fn reconstruct_noise_ble(
    y_meas: &[f64],
    basis: &BasisMatrix,
    ble: &BleModel,
) -> Result<Vec<f64>> {
    check_len(basis.len(), ble.len(), "BLE size vs basis length")?;
    check_len(basis.horizon(), y_meas.len(), "measurement length")?;
    let head = basis.analyze_rows(y_meas, ble.m);
    basis.synthesize_coefficients(&estimate_distortion(&head, ble)?)
}

/// `trace(err_cov) ≤ trace(Σ22)` and the error covariance is PSD to round-off.
pub fn check_dominance(ble: &BleModel) -> bool {
    let scale = ble.sigma22.trace().abs().max(f64::MIN_POSITIVE);
    ble.err_cov.trace() <= ble.sigma22.trace() + 1e-12 * scale
        && min_eigenvalue(&ble.err_cov) >= -1e-9 * scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{build_basis, BasisParams};
    use crate::linalg::max_abs_diff;
    use crate::noise::{CovariancePair, NoiseModel};

    fn basis() -> BasisMatrix {
        build_basis(BasisParams::new(0.5, 20, 300).unwrap()).unwrap()
    }

    fn nm2_sigma_lag(b: &BasisMatrix) -> DMatrix<f64> {
        CovariancePair::new(&NoiseModel::colored(0.3, vec![1.0, -0.9464, 0.7408]), b)
            .unwrap()
            .sigma_lag
    }

    #[test]
    fn head_extraction() {
        let b = basis();
        let known: Vec<f64> = (0..20).map(|k| (k as f64 * 0.37).sin()).collect();
        let e = b.synthesize_coefficients(&known).unwrap();
        let head = extract_head_distortion(&b.analyze(&e).unwrap(), 15).unwrap();
        assert_eq!(head.len(), 15);
        for k in 0..15 {
            assert!((head[k] - known[k]).abs() < 1e-9);
        }
        let parts = PartitionedSpectrum::split(&b.analyze(&e).unwrap(), 15).unwrap();
        assert_eq!(parts.tail.len(), 5);
        assert!(extract_head_distortion(&Spectrum::zeros(20, 0.5), 0).is_err());
        assert!(extract_head_distortion(&Spectrum::zeros(20, 0.5), 20).is_err());
    }

    #[test]
    fn noise_free_head_is_below_truncation() {
        let b = basis();
        let mut u = vec![0.0; 20];
        u[15] = 3.1;
        u[16] = 3.0;
        let y = crate::systems::delay_time(&b.synthesize_coefficients(&u).unwrap(), 4);
        let head = extract_head_distortion(&b.analyze(&y).unwrap(), 15).unwrap();
        assert!(head.iter().all(|h| h.abs() < 1e-3));
    }

    #[test]
    fn plain_reconstruction_of_basis_columns() {
        let b = basis();
        for j in [0, 7, 14] {
            let col: Vec<f64> = b.phi().column(j).iter().copied().collect();
            let r = reconstruct_noise_plain(&col, &b, 15).unwrap();
            let err = col
                .iter()
                .zip(&r)
                .map(|(a, c)| (a - c).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-10);
        }
        for j in [15, 19] {
            let col: Vec<f64> = b.phi().column(j).iter().copied().collect();
            let r = reconstruct_noise_plain(&col, &b, 15).unwrap();
            assert!(r.iter().all(|v| v.abs() < 1e-10));
        }
    }

    #[test]
    fn white_distortion_has_no_gain() {
        let sigma = DMatrix::identity(20, 20) * 0.3;
        let ble = fit_ble(&sigma, 15).unwrap();
        assert!(ble.gain.iter().all(|&g| g == 0.0));
        assert_eq!(ble.err_cov, ble.sigma22);
        let tail = ble_tail(&[1.0; 15], &ble).unwrap();
        assert!(tail.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn colored_distortion_strictly_improves() {
        let b = basis();
        let ble = fit_ble(&nm2_sigma_lag(&b), 15).unwrap();
        assert!(ble.err_cov.trace() < ble.sigma22.trace());
        assert!(check_dominance(&ble));
        let zero = ble_tail(&[0.0; 15], &ble).unwrap();
        assert!(zero.iter().all(|&t| t == 0.0));
        let sum = &ble.err_cov + ble.estimate_cov();
        assert!(max_abs_diff(&sum, &ble.sigma22) < 1e-12);
    }

    #[test]
    fn rank_deficient_covariance_is_repaired() {
        let v = DVector::from_fn(6, |i, _| 1.0 + i as f64);
        let sigma = &v * v.transpose();
        let ble = fit_ble(&sigma, 3).unwrap();
        assert!(ble.gain.iter().all(|g| g.is_finite()));
        assert!(check_dominance(&ble));
        assert!(fit_ble(&DMatrix::zeros(6, 6), 3).is_err());
    }

    #[test]
    fn reduce_noise_free_measurement() {
        let b = basis();
        let ble = fit_ble(&nm2_sigma_lag(&b), 15).unwrap();
        let mut u = vec![0.0; 20];
        u[15] = 3.1;
        u[16] = 3.0;
        let y = crate::systems::delay_time(&b.synthesize_coefficients(&u).unwrap(), 4);
        let plain = b.analyze(&y).unwrap();
        let reduced = reduce_noise(&y, &b, 15, &ble).unwrap();
        assert!(reduced.coefficients[..15].iter().all(|&c| c == 0.0));
        // head has only truncation residue, so the correction is tiny
        for k in 15..20 {
            assert!((reduced.coefficients[k] - plain.coefficients[k]).abs() < 1e-3);
        }
    }

    #[test]
    fn ble_time_estimate_decomposes() {
        // Ê_time = Φ_m Ξ y + Θ y with Θ = Φ_{m..L} gain Ξ.
        let b = basis();
        let ble = fit_ble(&nm2_sigma_lag(&b), 15).unwrap();
        let y: Vec<f64> = (0..300)
            .map(|t| ((t * 13 % 17) as f64 - 8.0) / 10.0)
            .collect();
        let xi = b.psi().rows(0, 15).into_owned();
        let theta = b.phi().columns(15, 5) * &ble.gain * &xi;
        let plain = reconstruct_noise_plain(&y, &b, 15).unwrap();
        let full = reconstruct_noise_ble(&y, &b, &ble).unwrap();
        let theta_y = &theta * DVector::from_column_slice(&y);
        for t in 0..300 {
            assert!((full[t] - plain[t] - theta_y[t]).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_checks() {
        let b = basis();
        let ble = fit_ble(&(DMatrix::identity(10, 10)), 5).unwrap();
        assert!(reduce_noise(&vec![0.0; 300], &b, 5, &ble).is_err());
        assert!(ble_tail(&[0.0; 4], &ble).is_err());
        assert!(fit_ble(&DMatrix::identity(4, 5), 2).is_err());
    }
}
