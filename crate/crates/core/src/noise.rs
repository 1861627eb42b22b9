//! Disturbance models: white, AR-colored, and random combinations of Laguerre
//! functions. Each model can draw realizations and report its covariance both
//! in time and on a Laguerre basis.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::basis::{laguerre_functions, BasisMatrix, BasisParams, Convention};
use crate::error::{check_len, Error, Result};
use crate::linalg::{psd_factor, repair_psd, symmetrize};

/// Impulse-response samples below this (relative to the peak) are dropped.
const IMPULSE_TAIL: f64 = 1e-12;
const MAX_IMPULSE_LEN: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    /// I.i.d. Gaussian with variance `lambda`.
    White { lambda: f64 },
    /// White noise through `1 / D(q)` with monic `denominator = [1, d_1, .., d_n]`,
    /// scaled to stationary variance `lambda`.
    Colored { lambda: f64, denominator: Vec<f64> },
    /// `e(t) = Σ_{k=0}^{K} e_k ℓ_k(t; p_e)` with `(e_0..e_K) ~ N(0, coef_cov)`.
    LaguerreCombination {
        p_e: f64,
        k: usize,
        coef_cov: DMatrix<f64>,
        #[serde(default)]
        convention: Convention,
    },
}

/// Time and Laguerre-domain covariance of one model on one basis.
#[derive(Debug, Clone)]
pub struct CovariancePair {
    pub sigma_time: DMatrix<f64>,
    pub sigma_lag: DMatrix<f64>,
}

impl CovariancePair {
    pub fn new(model: &NoiseModel, basis: &BasisMatrix) -> Result<Self> {
        let sigma_time = time_covariance(model, basis.horizon())?;
        let sigma_lag = laguerre_covariance(&sigma_time, basis)?;
        Ok(Self {
            sigma_time,
            sigma_lag,
        })
    }
}

impl NoiseModel {
    pub fn white(lambda: f64) -> Self {
        NoiseModel::White { lambda }
    }

    pub fn colored(lambda: f64, denominator: Vec<f64>) -> Self {
        NoiseModel::Colored {
            lambda,
            denominator,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            NoiseModel::White { .. } => "white",
            NoiseModel::Colored { .. } => "colored",
            NoiseModel::LaguerreCombination { .. } => "laguerre",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseModel::White { lambda } => check_variance(*lambda),
            NoiseModel::Colored {
                lambda,
                denominator,
            } => {
                check_variance(*lambda)?;
                check_stable(denominator)
            }
            NoiseModel::LaguerreCombination {
                p_e, k, coef_cov, ..
            } => {
                BasisParams::new(*p_e, k + 1, k + 1)?;
                if coef_cov.shape() != (k + 1, k + 1) {
                    return Err(Error::DimensionMismatch {
                        expected: k + 1,
                        actual: coef_cov.nrows(),
                        context: "coefficient covariance size (K + 1)",
                    });
                }
                psd_factor(coef_cov).map(|_| ())
            }
        }
    }

    /// Precomputes everything needed to draw realizations of length `horizon`.
    pub fn sampler(&self, horizon: usize) -> Result<NoiseSampler> {
        self.validate()?;
        let kind = match self {
            NoiseModel::White { lambda } => SamplerKind::White { sd: lambda.sqrt() },
            NoiseModel::Colored {
                lambda,
                denominator,
            } => {
                let g = impulse_response(denominator);
                let gain: f64 = g.iter().map(|x| x * x).sum();
                SamplerKind::Colored {
                    drive_sd: (lambda / gain).sqrt(),
                    feedback: denominator[1..].to_vec(),
                    burn_in: burn_in(denominator),
                }
            }
            NoiseModel::LaguerreCombination {
                p_e,
                k,
                coef_cov,
                convention,
            } => SamplerKind::Laguerre {
                factor: psd_factor(coef_cov)?,
                phi: laguerre_functions(*p_e, k + 1, horizon, *convention),
            },
        };
        Ok(NoiseSampler { horizon, kind })
    }
}

fn check_variance(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "noise variance λ = {lambda} must be positive"
        )))
    }
}

/// Stability of a monic polynomial via the Schur–Cohn step-down recursion.
fn check_stable(denominator: &[f64]) -> Result<()> {
    if denominator.first() != Some(&1.0) {
        return Err(Error::InvalidParameter(
            "filter denominator must be monic (leading coefficient 1)".into(),
        ));
    }
    let mut a = denominator.to_vec();
    while a.len() > 1 {
        let n = a.len() - 1;
        let k = a[n] / a[0];
        if !k.is_finite() || k.abs() >= 1.0 {
            return Err(Error::UnstableFilter(max_pole_magnitude(denominator)));
        }
        a = (0..n)
            .map(|i| (a[i] - k * a[n - i]) / (1.0 - k * k))
            .collect();
    }
    Ok(())
}

/// Largest pole magnitude of `1 / D(q)` from the companion matrix.
pub fn max_pole_magnitude(denominator: &[f64]) -> f64 {
    let n = denominator.len().saturating_sub(1);
    if n == 0 {
        return 0.0;
    }
    let companion = DMatrix::from_fn(n, n, |i, j| {
        if i == 0 {
            -denominator[j + 1] / denominator[0]
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    companion
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Impulse response of `1 / D(q)` (the pure `q^{-n}` lag is dropped), truncated
/// once the last `n` samples fall below `IMPULSE_TAIL` relative to the peak.
pub fn impulse_response(denominator: &[f64]) -> Vec<f64> {
    let n = denominator.len() - 1;
    let mut g = vec![1.0];
    let mut peak = 1.0f64;
    while g.len() < MAX_IMPULSE_LEN {
        let t = g.len();
        let v: f64 = -(1..=n.min(t))
            .map(|k| denominator[k] * g[t - k])
            .sum::<f64>();
        peak = peak.max(v.abs());
        g.push(v);
        if t >= n
            && g[t + 1 - n.max(1)..]
                .iter()
                .all(|x| x.abs() < IMPULSE_TAIL * peak)
        {
            break;
        }
    }
    g
}

/// Ten time constants of the slowest pole.
fn burn_in(denominator: &[f64]) -> usize {
    let r = max_pole_magnitude(denominator);
    if r <= 0.0 {
        return denominator.len();
    }
    let tc = -1.0 / r.ln();
    (10.0 * tc).ceil() as usize + denominator.len()
}

#[derive(Debug, Clone)]
enum SamplerKind {
    White {
        sd: f64,
    },
    Colored {
        drive_sd: f64,
        feedback: Vec<f64>,
        burn_in: usize,
    },
    Laguerre {
        factor: DMatrix<f64>,
        phi: DMatrix<f64>,
    },
}

/// Draws noise realizations of a fixed length.
#[derive(Debug, Clone)]
pub struct NoiseSampler {
    horizon: usize,
    kind: SamplerKind,
}

impl NoiseSampler {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.kind {
            SamplerKind::White { sd } => (0..self.horizon)
                .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
                .collect(),
            SamplerKind::Colored {
                drive_sd,
                feedback,
                burn_in,
            } => {
                let total = burn_in + self.horizon;
                let mut e = vec![0.0; total];
                for t in 0..total {
                    let mut v = drive_sd * rng.sample::<f64, _>(StandardNormal);
                    for (k, d) in feedback.iter().enumerate() {
                        if t > k {
                            v -= d * e[t - k - 1];
                        }
                    }
                    e[t] = v;
                }
                e.split_off(*burn_in)
            }
            SamplerKind::Laguerre { factor, phi } => {
                let z =
                    DVector::from_fn(factor.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
                let coef = factor * z;
                (phi * coef).iter().copied().collect()
            }
        }
    }
}

/// One realization of `model` on `horizon` samples from `seed`.
pub fn sample(model: &NoiseModel, horizon: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(model.sampler(horizon)?.sample(&mut rng))
}

/// Autocovariance `r(0..lags)` of the colored model (`lambda_v Σ g(t)g(t+k)`).
pub fn colored_autocovariance(lambda: f64, denominator: &[f64], lags: usize) -> Vec<f64> {
    let g = impulse_response(denominator);
    let gain: f64 = g.iter().map(|x| x * x).sum();
    let drive = lambda / gain;
    (0..lags)
        .map(|k| {
            if k >= g.len() {
                0.0
            } else {
                drive * g.iter().zip(&g[k..]).map(|(a, b)| a * b).sum::<f64>()
            }
        })
        .collect()
}

/// `Σ_time` on `horizon` samples.
pub fn time_covariance(model: &NoiseModel, horizon: usize) -> Result<DMatrix<f64>> {
    model.validate()?;
    Ok(match model {
        NoiseModel::White { lambda } => DMatrix::identity(horizon, horizon) * *lambda,
        NoiseModel::Colored {
            lambda,
            denominator,
        } => {
            let r = colored_autocovariance(*lambda, denominator, horizon);
            DMatrix::from_fn(horizon, horizon, |i, j| r[i.abs_diff(j)])
        }
        NoiseModel::LaguerreCombination {
            p_e,
            k,
            coef_cov,
            convention,
        } => {
            let phi = laguerre_functions(*p_e, k + 1, horizon, *convention);
            symmetrize(&(&phi * coef_cov * phi.transpose()))
        }
    })
}

/// `Σ_lag = Ψ Σ_time Ψᵀ`, symmetrized.
pub fn laguerre_covariance(sigma_time: &DMatrix<f64>, basis: &BasisMatrix) -> Result<DMatrix<f64>> {
    check_len(basis.horizon(), sigma_time.nrows(), "time covariance rows")?;
    check_len(
        basis.horizon(),
        sigma_time.ncols(),
        "time covariance columns",
    )?;
    let psi = basis.psi();
    Ok(symmetrize(&(psi * sigma_time * psi.transpose())))
}

/// Laguerre-combination model whose coefficient covariance is the colored
/// covariance projected on the first `K + 1` functions with parameter `p_e`.
pub fn nm3_from_colored(
    sigma_time_colored: &DMatrix<f64>,
    p_e: f64,
    k: usize,
    horizon: usize,
) -> Result<NoiseModel> {
    nm3_from_colored_with(sigma_time_colored, p_e, k, horizon, Convention::default())
}

pub fn nm3_from_colored_with(
    sigma_time_colored: &DMatrix<f64>,
    p_e: f64,
    k: usize,
    horizon: usize,
    convention: Convention,
) -> Result<NoiseModel> {
    let basis = BasisMatrix::new(BasisParams::new(p_e, k + 1, horizon)?, convention)?;
    let coef_cov = repair_psd(&laguerre_covariance(sigma_time_colored, &basis)?)?;
    Ok(NoiseModel::LaguerreCombination {
        p_e,
        k,
        coef_cov,
        convention,
    })
}
