//! Discrete Laguerre functions sampled on a finite horizon, together with the
//! analysis operator `Ψ = (ΦᵀΦ)⁻¹Φᵀ` and synthesis operator `Φ`.
//!
//! Column `j` of `Φ` holds `ℓ_j(t; p)` for `t = 0..T-1`, where `ℓ_j` is the
//! inverse z-transform of
//!
//! ```text
//! L_j(z; p) = √(1-p) / (z - √p) · ((1 - √p z) / (z - √p))^j
//! ```
//!
//! Under the default [`Convention::StrictlyProper`] every `ℓ_j(0) = 0`. The
//! [`Convention::Shifted`] variant uses `z·L_j(z)` instead, i.e. the same
//! sequences advanced by one sample. Both families are orthonormal in `l²` and
//! give identical Laguerre-domain input/output relations.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Gram matrices with a condition number above this are treated as rank deficient.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

/// Time-domain indexing of the Laguerre functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// Exact inverse z-transform, `ℓ_0(t) = √(1-p)·√p^(t-1)` for `t ≥ 1`, `ℓ_j(0) = 0`.
    #[default]
    StrictlyProper,
    /// `ℓ_0(t) = √(1-p)·√p^t` from `t = 0`.
    Shifted,
}

impl Convention {
    pub fn as_str(self) -> &'static str {
        match self {
            Convention::StrictlyProper => "strictly_proper",
            Convention::Shifted => "shifted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisParams {
    /// Laguerre parameter, `0 < p < 1`.
    pub p: f64,
    /// Number of basis functions `L`.
    pub len: usize,
    /// Time horizon `T` in samples.
    pub horizon: usize,
}

impl BasisParams {
    pub fn new(p: f64, len: usize, horizon: usize) -> Result<Self> {
        let params = Self { p, len, horizon };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "Laguerre parameter p = {} must satisfy 0 < p < 1",
                self.p
            )));
        }
        if self.len == 0 {
            return Err(Error::InvalidParameter(
                "basis length L must be at least 1".into(),
            ));
        }
        if self.horizon < self.len {
            return Err(Error::InvalidParameter(format!(
                "horizon T = {} is shorter than basis length L = {}",
                self.horizon, self.len
            )));
        }
        Ok(())
    }
}

/// A finite Laguerre spectrum: the first coefficients of a signal in the basis with parameter `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub coefficients: Vec<f64>,
    pub p: f64,
}

impl Spectrum {
    pub fn new(coefficients: Vec<f64>, p: f64) -> Self {
        Self { coefficients, p }
    }

    pub fn zeros(len: usize, p: f64) -> Self {
        Self::new(vec![0.0; len], p)
    }

    pub fn unit(index: usize, len: usize, p: f64) -> Self {
        let mut s = Self::zeros(len, p);
        s.coefficients[index] = 1.0;
        s
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coefficients
    }

    /// Index of the first non-zero coefficient.
    pub fn first_nonzero(&self) -> Option<usize> {
        self.coefficients.iter().position(|&c| c != 0.0)
    }

    pub fn energy(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum()
    }
}

/// Samples the first `count` Laguerre functions on `horizon` samples.
///
/// `ℓ_0` is the impulse response of `√(1-p)/(z-√p)`; each further column
/// passes the previous one through the all-pass `(1-√p z)/(z-√p)`:
/// `w(t+1) = √p·w(t) + v(t) − √p·v(t+1)`, `w(0) = −√p·v(0)`.
pub fn laguerre_functions(
    p: f64,
    count: usize,
    horizon: usize,
    convention: Convention,
) -> DMatrix<f64> {
    let offset = match convention {
        Convention::StrictlyProper => 0,
        Convention::Shifted => 1,
    };
    let n = horizon + offset;
    let sp = p.sqrt();
    if count == 0 || horizon == 0 {
        return DMatrix::zeros(horizon, count);
    }
    let mut full = DMatrix::<f64>::zeros(n, count);
    {
        let mut col = full.column_mut(0);
        let mut value = (1.0 - p).sqrt();
        for t in 1..n {
            col[t] = value;
            value *= sp;
        }
    }
    for j in 1..count {
        let (prev, mut next) = full.columns_range_pair_mut(j - 1, j);
        next[0] = -sp * prev[0];
        for t in 0..n - 1 {
            next[t + 1] = sp * next[t] + prev[t] - sp * prev[t + 1];
        }
    }
    full.rows(offset, horizon).into_owned()
}

/// Sampled Laguerre basis with its analysis operator. Immutable once built.
#[derive(Debug, Clone)]
pub struct BasisMatrix {
    params: BasisParams,
    convention: Convention,
    phi: DMatrix<f64>,
    psi: DMatrix<f64>,
}

pub fn build_basis(params: BasisParams) -> Result<BasisMatrix> {
    BasisMatrix::new(params, Convention::default())
}

impl BasisMatrix {
    pub fn new(params: BasisParams, convention: Convention) -> Result<Self> {
        params.validate()?;
        let phi = laguerre_functions(params.p, params.len, params.horizon, convention);
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("generating Laguerre functions"));
        }
        let psi = left_inverse(&phi)?;
        Ok(Self {
            params,
            convention,
            phi,
            psi,
        })
    }

    pub fn params(&self) -> BasisParams {
        self.params
    }

    pub fn p(&self) -> f64 {
        self.params.p
    }

    pub fn len(&self) -> usize {
        self.params.len
    }

    pub fn is_empty(&self) -> bool {
        self.params.len == 0
    }

    pub fn horizon(&self) -> usize {
        self.params.horizon
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    /// `T × L` synthesis matrix.
    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    /// `L × T` analysis matrix.
    pub fn psi(&self) -> &DMatrix<f64> {
        &self.psi
    }

    pub fn gram(&self) -> DMatrix<f64> {
        self.phi.transpose() * &self.phi
    }

    /// `Ψ · signal`.
    pub fn analyze(&self, signal: &[f64]) -> Result<Spectrum> {
        check_len(self.horizon(), signal.len(), "analyzed signal length")?;
        Ok(Spectrum::new(
            self.analyze_rows(signal, self.len()),
            self.p(),
        ))
    }

    /// First `rows` coefficients of `Ψ · signal`. Signal length is not checked.
    pub(crate) fn analyze_rows(&self, signal: &[f64], rows: usize) -> Vec<f64> {
        let mut out = vec![0.0; rows];
        // Ψ is column-major, so walk one time sample (column) at a time.
        for (t, &y) in signal.iter().enumerate() {
            if y == 0.0 {
                continue;
            }
            let col = self.psi.column(t);
            for (o, &w) in out.iter_mut().zip(col.iter()) {
                *o += w * y;
            }
        }
        out
    }

    /// `Φ · coefficients`, zero-padding a spectrum shorter than `L`.
    pub fn synthesize(&self, spectrum: &Spectrum) -> Result<Vec<f64>> {
        self.synthesize_coefficients(spectrum.as_slice())
    }

    pub fn synthesize_coefficients(&self, coefficients: &[f64]) -> Result<Vec<f64>> {
        if coefficients.len() > self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: coefficients.len(),
                context: "synthesized spectrum length",
            });
        }
        let mut out = vec![0.0; self.horizon()];
        for (j, &c) in coefficients.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for (o, &v) in out.iter_mut().zip(self.phi.column(j).iter()) {
                *o += c * v;
            }
        }
        Ok(out)
    }
}

fn left_inverse(phi: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let gram = phi.transpose() * phi;
    let eig = gram.clone().symmetric_eigenvalues();
    let max = eig.iter().copied().fold(0.0f64, f64::max);
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !condition.is_finite() || condition > MAX_GRAM_CONDITION {
        return Err(Error::RankDeficient { condition });
    }
    let psi = match gram.clone().cholesky() {
        Some(chol) => chol.solve(&phi.transpose()),
        None => phi
            .clone()
            .svd(true, true)
            .pseudo_inverse(f64::EPSILON * max)
            .map_err(|_| Error::RankDeficient { condition })?,
    };
    if psi.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("inverting the Gram matrix"));
    }
    Ok(psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    /// `ℓ_j(t)` by inverse DFT of `L_j(e^{iω})` on `n` frequencies; aliasing is
    /// negligible once `n` is far beyond the support of `ℓ_j`.
    fn dft_oracle(p: f64, j: usize, horizon: usize, n: usize) -> Vec<f64> {
        use nalgebra::Complex;
        let sp = p.sqrt();
        let spectrum: Vec<Complex<f64>> = (0..n)
            .map(|k| {
                let z = Complex::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64);
                let allpass = (Complex::new(1.0, 0.0) - z * sp) / (z - sp);
                allpass.powu(j as u32) * (1.0 - p).sqrt() / (z - sp)
            })
            .collect();
        (0..horizon)
            .map(|t| {
                let acc: Complex<f64> = spectrum
                    .iter()
                    .enumerate()
                    .map(|(k, l)| {
                        let w = 2.0 * std::f64::consts::PI * ((k * t) % n) as f64 / n as f64;
                        l * Complex::from_polar(1.0, w)
                    })
                    .sum();
                acc.re / n as f64
            })
            .collect()
    }

    #[test]
    fn first_function_closed_form() {
        let b = build_basis(BasisParams::new(0.5, 1, 2000).unwrap()).unwrap();
        let col = b.phi().column(0);
        assert_eq!(col[0], 0.0);
        assert!((col[1] - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((col[1] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        for t in 1..60 {
            let expected = 0.5f64.sqrt() * 0.5f64.sqrt().powi(t as i32 - 1);
            assert!((col[t] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn recurrence_matches_inverse_dft() {
        for &p in &[0.1, 0.5, 0.8] {
            let phi = laguerre_functions(p, 12, 200, Convention::StrictlyProper);
            for j in 0..12 {
                let oracle = dft_oracle(p, j, 200, 8192);
                for t in 0..200 {
                    assert!(
                        (phi[(t, j)] - oracle[t]).abs() < 1e-12,
                        "p={p} j={j} t={t}: {} vs {}",
                        phi[(t, j)],
                        oracle[t]
                    );
                }
            }
        }
    }

    #[test]
    fn shifted_convention_advances_one_sample() {
        let strict = laguerre_functions(0.3, 5, 101, Convention::StrictlyProper);
        let shifted = laguerre_functions(0.3, 5, 100, Convention::Shifted);
        for j in 0..5 {
            for t in 0..100 {
                assert_eq!(shifted[(t, j)], strict[(t + 1, j)]);
            }
        }
        assert!((shifted[(0, 0)] - 0.7f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn near_orthonormal_at_long_horizon() {
        let b = build_basis(BasisParams::new(0.5, 20, 1500).unwrap()).unwrap();
        let dev = max_abs_diff(&b.gram(), &DMatrix::identity(20, 20));
        assert!(dev < 1e-6, "{dev}");
        let b = build_basis(BasisParams::new(0.5, 20, 300).unwrap()).unwrap();
        assert!(max_abs_diff(&b.gram(), &DMatrix::identity(20, 20)) < 1e-3);
    }

    #[test]
    fn gram_deviation_decreases_with_horizon() {
        // p = 0.9 keeps the tail visible at T = 100 and 300.
        let dev = |t| {
            let b = BasisMatrix::new(BasisParams::new(0.9, 10, t).unwrap(), Convention::default())
                .unwrap();
            max_abs_diff(&b.gram(), &DMatrix::identity(10, 10))
        };
        let (d100, d300, d1500) = (dev(100), dev(300), dev(1500));
        assert!(d100 > d300 && d300 > d1500, "{d100} {d300} {d1500}");
    }

    #[test]
    fn column_norms_bounded_by_one() {
        let b = build_basis(BasisParams::new(0.7, 15, 400).unwrap()).unwrap();
        let gram = b.gram();
        for j in 0..15 {
            assert!(gram[(j, j)] <= 1.0 + 1e-12);
            assert!(gram[(j, j)] > 0.9);
        }
    }

    #[test]
    fn analysis_is_left_inverse() {
        for &(p, l, t) in &[(0.5, 20, 300), (0.9, 10, 600), (0.2, 5, 6), (0.5, 1, 2)] {
            let b = build_basis(BasisParams::new(p, l, t).unwrap()).unwrap();
            let id = b.psi() * b.phi();
            assert!(
                max_abs_diff(&id, &DMatrix::identity(l, l)) < 1e-10,
                "{p} {l} {t}"
            );
        }
    }

    #[test]
    fn analyze_basis_column_and_zero() {
        let b = build_basis(BasisParams::new(0.5, 20, 300).unwrap()).unwrap();
        let col: Vec<f64> = b.phi().column(7).iter().copied().collect();
        let s = b.analyze(&col).unwrap();
        for (k, c) in s.as_slice().iter().enumerate() {
            let want = if k == 7 { 1.0 } else { 0.0 };
            assert!((c - want).abs() < 1e-10);
        }
        let z = b.analyze(&vec![0.0; 300]).unwrap();
        assert!(z.as_slice().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn designed_input_spectrum_round_trip() {
        let b = build_basis(BasisParams::new(0.5, 20, 300).unwrap()).unwrap();
        let mut u = vec![0.0; 20];
        u[15] = 3.1;
        u[16] = 3.0;
        let signal = b.synthesize(&Spectrum::new(u.clone(), 0.5)).unwrap();
        let s = b.analyze(&signal).unwrap();
        for (c, e) in s.coefficients.iter().zip(&u) {
            assert!((c - e).abs() < 1e-9);
        }
        // Parseval on the span, oracle: direct summation of squared samples.
        let energy: f64 = signal.iter().map(|x| x * x).sum();
        assert!((energy - 18.61).abs() < 1e-6, "{energy}");
    }

    #[test]
    fn synthesize_unit_is_column() {
        let b = build_basis(BasisParams::new(0.4, 6, 50).unwrap()).unwrap();
        let s = b.synthesize(&Spectrum::unit(3, 6, 0.4)).unwrap();
        for (t, v) in s.iter().enumerate() {
            assert_eq!(*v, b.phi()[(t, 3)]);
        }
        let short = b.synthesize_coefficients(&[0.0, 1.0]).unwrap();
        for (t, v) in short.iter().enumerate() {
            assert_eq!(*v, b.phi()[(t, 1)]);
        }
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(BasisParams::new(0.0, 3, 10).is_err());
        assert!(BasisParams::new(1.0, 3, 10).is_err());
        assert!(BasisParams::new(f64::NAN, 3, 10).is_err());
        assert!(BasisParams::new(0.5, 0, 10).is_err());
        assert!(BasisParams::new(0.5, 11, 10).is_err());
    }

    #[test]
    fn rank_deficient_basis_detected() {
        // With ℓ_j(0) = 0 the first row of Φ is zero, so T = L leaves Φ singular.
        let err = build_basis(BasisParams::new(0.5, 4, 4).unwrap()).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { .. }));
    }

    #[test]
    fn length_mismatch_errors() {
        let b = build_basis(BasisParams::new(0.5, 4, 20).unwrap()).unwrap();
        assert!(b.analyze(&[0.0; 19]).is_err());
        assert!(b.synthesize_coefficients(&[0.0; 5]).is_err());
    }
}
