//! Closed-form delay estimation from Laguerre-domain Markov parameters.
//!
//! For the delay, three consecutive Markov parameters satisfy
//!
//! ```text
//! τ β h_m = −((m+1) h_{m+1} + (m−1) h_{m−1}) − m α h_m,   α = √p + 1/√p,  β = √p − 1/√p
//! ```
//!
//! Stacking rows `m = 1..M−1` gives `a + b τ = 0` with `a_m = (m−1)h_{m−1} + mα h_m + (m+1)h_{m+1}`
//! and `b_m = β h_m`, solved in the least-squares sense as `τ̂ = −bᵀa / bᵀb`.

use crate::basis::Spectrum;
use crate::error::{Error, Result};

/// `bᵀb` below this fraction of `‖a‖²` is treated as degenerate.
pub const DEGENERATE_RATIO: f64 = 1e-12;

/// Inverse-filter of the input spectrum starting at its first non-zero coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct DeconvolutionPlan {
    /// Index of the first non-zero input coefficient.
    pub n: usize,
    /// `g_0 = 1/u_n`, `g_k = −(1/u_n) Σ_{j<k} u_{n+k−j} g_j` (indices relative to `n`).
    pub g: Vec<f64>,
    /// Number of Markov parameters the plan recovers.
    pub count: usize,
    pub u: Vec<f64>,
}

impl DeconvolutionPlan {
    pub fn new(u: &Spectrum, count: usize) -> Result<Self> {
        let n = u
            .first_nonzero()
            .ok_or_else(|| Error::Degenerate("input spectrum is identically zero".into()))?;
        if count == 0 {
            return Err(Error::InvalidParameter(
                "need at least one Markov estimate".into(),
            ));
        }
        let uc = u.as_slice();
        let un = uc[n];
        let shifted = |k: usize| uc.get(n + k).copied().unwrap_or(0.0);
        let mut g = Vec::with_capacity(count);
        g.push(1.0 / un);
        for k in 1..count {
            let s: f64 = (0..k).map(|j| shifted(k - j) * g[j]).sum();
            g.push(-s / un);
        }
        Ok(Self {
            n,
            g,
            count,
            u: uc.to_vec(),
        })
    }

    /// `ĥ_k = Σ_{j≤k} g_{k−j} y_{n+j}`, `k = 0..count−1`.
    pub fn apply(&self, y: &Spectrum) -> Result<Vec<f64>> {
        let needed = self.n + self.count;
        if y.len() < needed {
            return Err(Error::InvalidParameter(format!(
                "{} Markov estimates from index {} need {} output coefficients, have {}",
                self.count,
                self.n,
                needed,
                y.len()
            )));
        }
        let yc = &y.as_slice()[self.n..needed];
        Ok((0..self.count)
            .map(|k| (0..=k).map(|j| self.g[k - j] * yc[j]).sum())
            .collect())
    }
}

/// Markov estimates `ĥ_0..ĥ_{count−1}` from input and output spectra: solves the
/// square lower-triangular Toeplitz system `y_{n+i} = Σ_{k≤i} ĥ_k u_{n+i−k}`.
pub fn deconvolve_markov(y: &Spectrum, u: &Spectrum, count: usize) -> Result<Vec<f64>> {
    DeconvolutionPlan::new(u, count)?.apply(y)
}

/// Result of the closed-form estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayEstimate {
    pub tau_hat: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub h_hat: Vec<f64>,
}

impl DelayEstimate {
    /// Nearest positive integer delay.
    pub fn rounded(&self) -> usize {
        self.tau_hat.round().max(1.0) as usize
    }
}

fn alpha_beta(p: f64) -> (f64, f64) {
    let sp = p.sqrt();
    (sp + 1.0 / sp, sp - 1.0 / sp)
}

/// Identity vectors `(a, b)` from Markov estimates. Indices are taken relative
/// to the first non-zero estimate; rows `m = 1..len−2` are formed.
pub fn build_ab(h_hat: &[f64], p: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "Laguerre parameter p = {p}"
        )));
    }
    let n = h_hat
        .iter()
        .position(|&h| h != 0.0)
        .ok_or_else(|| Error::Degenerate("all Markov estimates are zero".into()))?;
    let h = &h_hat[n..];
    if h.len() < 4 {
        return Err(Error::Degenerate(format!(
            "need at least 4 Markov values from the first non-zero one, have {}",
            h.len()
        )));
    }
    let (alpha, beta) = alpha_beta(p);
    let rows = 1..h.len() - 1;
    let a = rows
        .clone()
        .map(|m| {
            let mf = m as f64;
            (mf - 1.0) * h[m - 1] + mf * alpha * h[m] + (mf + 1.0) * h[m + 1]
        })
        .collect();
    let b = rows.map(|m| beta * h[m]).collect();
    Ok((a, b))
}

/// `τ̂ = −bᵀa / bᵀb`.
pub fn estimate_delay(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
            context: "identity vectors a and b",
        });
    }
    let btb: f64 = b.iter().map(|x| x * x).sum();
    let ata: f64 = a.iter().map(|x| x * x).sum();
    let bta: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    if btb.partial_cmp(&(DEGENERATE_RATIO * ata)) != Some(std::cmp::Ordering::Greater) || btb == 0.0
    {
        return Err(Error::Degenerate(format!(
            "bᵀb = {btb:.3e} is negligible against ‖a‖² = {ata:.3e}"
        )));
    }
    Ok(-bta / btb)
}

/// Delay from three consecutive Markov parameters around index `m ≥ 1`.
pub fn estimate_delay_scalar(h_prev: f64, h_m: f64, h_next: f64, m: usize, p: f64) -> Result<f64> {
    if m < 1 {
        return Err(Error::InvalidParameter(
            "row index m must be at least 1".into(),
        ));
    }
    if h_m == 0.0 || h_m.abs() <= 1e-12 * h_prev.abs().max(h_next.abs()) {
        return Err(Error::Degenerate("middle Markov parameter is zero".into()));
    }
    let (alpha, beta) = alpha_beta(p);
    let mf = m as f64;
    Ok(-((mf + 1.0) * h_next + (mf - 1.0) * h_prev) / (beta * h_m) - mf * alpha / beta)
}

/// Full estimator: deconvolve `markov_rows + 1` Markov parameters and solve for τ.
pub fn estimate_from_spectra(
    y: &Spectrum,
    u: &Spectrum,
    markov_rows: usize,
    p: f64,
) -> Result<DelayEstimate> {
    let plan = DeconvolutionPlan::new(u, markov_rows + 1)?;
    estimate_with_plan(&plan, y, p)
}

pub fn estimate_with_plan(plan: &DeconvolutionPlan, y: &Spectrum, p: f64) -> Result<DelayEstimate> {
    let h_hat = plan.apply(y)?;
    let (a, b) = build_ab(&h_hat, p)?;
    let tau_hat = estimate_delay(&a, &b)?;
    Ok(DelayEstimate {
        tau_hat,
        a,
        b,
        h_hat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{delay_spectrum, markov_parameters};
    use proptest::prelude::*;

    fn reference_input() -> Spectrum {
        let mut u = vec![0.0; 20];
        u[15] = 3.1;
        u[16] = 3.0;
        Spectrum::new(u, 0.5)
    }

    /// Forward substitution on the lower-triangular Toeplitz system.
    fn triangular_oracle(y: &[f64], u: &[f64], n: usize, count: usize) -> Vec<f64> {
        let mut h = vec![0.0; count];
        for i in 0..count {
            let s: f64 = (0..i).map(|k| h[k] * u[n + i - k]).sum();
            h[i] = (y[n + i] - s) / u[n];
        }
        h
    }

    #[test]
    fn exact_spectrum_recovers_markov_parameters() {
        let u = reference_input();
        for tau in 1..=10 {
            let y = delay_spectrum(&u, tau, 0.5).unwrap();
            let h = deconvolve_markov(&y, &u, 5).unwrap();
            let exact = markov_parameters(tau, 0.5, 4).unwrap().with_throughput();
            for k in 0..5 {
                assert!((h[k] - exact[k]).abs() < 1e-10, "tau={tau} k={k}");
            }
            assert!((h[0] - 0.5f64.sqrt().powi(tau as i32)).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_pulse_input_passes_output_through() {
        let u = Spectrum::unit(3, 10, 0.5);
        let y = Spectrum::new((0..10).map(|k| k as f64 * 0.1).collect(), 0.5);
        let h = deconvolve_markov(&y, &u, 6).unwrap();
        for (hk, yk) in h.iter().zip(&y.coefficients[3..]) {
            assert!((hk - yk).abs() < 1e-15);
        }
    }

    #[test]
    fn g_recursion_is_convolutional_inverse() {
        let u = Spectrum::new(
            vec![0.0, 0.0, 1.5, -0.7, 0.4, 2.0, 0.0, 0.3, 0.0, 0.0, 0.0, 0.0],
            0.5,
        );
        let plan = DeconvolutionPlan::new(&u, 10).unwrap();
        assert_eq!(plan.n, 2);
        for i in 0..10 {
            let conv: f64 = (0..=i)
                .map(|j| u.coefficients.get(2 + i - j).copied().unwrap_or(0.0) * plan.g[j])
                .sum();
            let want = if i == 0 { 1.0 } else { 0.0 };
            assert!((conv - want).abs() < 1e-10);
        }
    }

    #[test]
    fn plan_matches_triangular_solve() {
        let u = reference_input();
        let y = Spectrum::new((0..20).map(|k| (k as f64 * 0.91).cos()).collect(), 0.5);
        let h = deconvolve_markov(&y, &u, 5).unwrap();
        let oracle = triangular_oracle(&y.coefficients, &u.coefficients, 15, 5);
        for k in 0..5 {
            assert!((h[k] - oracle[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn deconvolution_errors() {
        let u = reference_input();
        assert!(
            deconvolve_markov(&Spectrum::zeros(20, 0.5), &Spectrum::zeros(20, 0.5), 5).is_err()
        );
        assert!(deconvolve_markov(&Spectrum::zeros(20, 0.5), &u, 6).is_err());
    }

    #[test]
    fn unit_delay_row_by_hand() {
        let h = markov_parameters(1, 0.5, 4).unwrap().with_throughput();
        let (a, b) = build_ab(&h, 0.5).unwrap();
        // row m = 2: 2α h_2 + 3 h_3 + h_1
        assert!((a[1] + 0.25).abs() < 1e-12);
        assert!((b[1] - 0.25).abs() < 1e-12);
        assert!((-a[1] / b[1] - 1.0).abs() < 1e-12);
        let tau = estimate_delay_scalar(h[1], h[2], h[3], 2, 0.5).unwrap();
        assert!((tau - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_holds_for_exact_markov() {
        for tau in 1..=10 {
            for &p in &[0.3, 0.5, 0.7] {
                let h = markov_parameters(tau, p, 8).unwrap().with_throughput();
                let (a, b) = build_ab(&h, p).unwrap();
                let res = a
                    .iter()
                    .zip(&b)
                    .map(|(x, y)| (x + y * tau as f64).abs())
                    .fold(0.0, f64::max);
                assert!(res < 1e-9, "tau={tau} p={p}: {res}");
            }
        }
    }

    #[test]
    fn exact_delay_four() {
        let h = markov_parameters(4, 0.5, 4).unwrap().with_throughput();
        let (a, b) = build_ab(&h, 0.5).unwrap();
        assert!((estimate_delay(&a, &b).unwrap() - 4.0).abs() < 1e-9);
        let h = markov_parameters(4, 0.5, 7).unwrap().with_throughput();
        for m in 1..=4 {
            let t = estimate_delay_scalar(h[m - 1], h[m], h[m + 1], m, 0.5).unwrap();
            assert!((t - 4.0).abs() < 1e-9, "m={m}");
        }
        // h_5 vanishes for τ = 4, p = 0.5, so row 5 carries no information.
        assert!(h[5].abs() < 1e-15);
        assert!(estimate_delay_scalar(h[4], h[5], h[6], 5, 0.5).is_err());
    }

    #[test]
    fn scalar_and_vector_forms_agree() {
        let h = markov_parameters(6, 0.3, 6).unwrap().with_throughput();
        let (a, b) = build_ab(&h, 0.3).unwrap();
        let vector = estimate_delay(&a, &b).unwrap();
        for m in 1..h.len() - 1 {
            let scalar = estimate_delay_scalar(h[m - 1], h[m], h[m + 1], m, 0.3).unwrap();
            assert!((scalar - vector).abs() < 1e-9);
        }
    }

    #[test]
    fn algebraic_edge_cases() {
        let v = [0.3, -1.2, 2.0];
        assert!((estimate_delay(&v, &v).unwrap() + 1.0).abs() < 1e-15);
        assert!(estimate_delay(&[1.0, 2.0], &[0.0, 0.0]).is_err());
        assert!(build_ab(&[0.0; 6], 0.5).is_err());
        assert!(build_ab(&[1.0, 2.0, 3.0], 0.5).is_err());
        assert!(estimate_delay_scalar(1.0, 0.0, 1.0, 2, 0.5).is_err());
    }

    #[test]
    fn full_estimator_on_analytic_spectrum() {
        let u = reference_input();
        let y = delay_spectrum(&u, 4, 0.5).unwrap();
        let est = estimate_from_spectra(&y, &u, 4, 0.5).unwrap();
        assert_eq!(est.h_hat.len(), 5);
        assert_eq!(est.a.len(), 3);
        assert!((est.tau_hat - 4.0).abs() < 1e-9);
        assert_eq!(est.rounded(), 4);
    }

    proptest! {
        #[test]
        fn scale_invariance(scale in prop_oneof![-100.0f64..-0.01, 0.01f64..100.0], tau in 1usize..10) {
            let h = markov_parameters(tau, 0.5, 5).unwrap().with_throughput();
            let noisy: Vec<f64> = h.iter().enumerate().map(|(i, v)| v + 0.01 * (i as f64).sin()).collect();
            let (a, b) = build_ab(&noisy, 0.5).unwrap();
            let base = estimate_delay(&a, &b).unwrap();
            let scaled: Vec<f64> = noisy.iter().map(|v| v * scale).collect();
            let (a, b) = build_ab(&scaled, 0.5).unwrap();
            let moved = estimate_delay(&a, &b).unwrap();
            prop_assert!((base - moved).abs() < 1e-9 * base.abs().max(1.0));
        }
    }
}
