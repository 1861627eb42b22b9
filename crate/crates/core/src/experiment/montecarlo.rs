//! Seeded single trials and Monte Carlo campaigns.
//!
//! Trial `i` of a campaign draws its noise from `ChaCha8Rng::seed_from_u64(base_seed + i)`,
//! so any trial can be replayed alone. Trials run in parallel when the
//! `parallel` feature is on; results are reduced in trial order, so the
//! summary does not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{McConfig, Reduction};
use crate::basis::{BasisMatrix, BasisParams, Convention, Spectrum};
use crate::delay::{estimate_with_plan, DeconvolutionPlan};
use crate::error::{Error, Result};
use crate::noise::{CovariancePair, NoiseSampler};
use crate::reduction::{estimate_distortion, fit_ble, reduce_spectrum, BleModel};
use crate::systems::delay_time;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
    #[cfg(feature = "parallel")]
    #[default]
    Parallel,
}

/// Outcome of one trial. Raw and reduced estimates share one noise realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub tau_hat_raw: f64,
    /// `None` when the campaign has no reduction step.
    pub tau_hat_reduced: Option<f64>,
    /// First `m` measured coefficients.
    pub head_distortion: Vec<f64>,
    /// `E⁽²⁾ − Ê⁽²⁾` with the BLE, or `E⁽²⁾` itself without reduction.
    pub tail_error: Vec<f64>,
}

/// Everything a single trial produces, for inspection and plotting.
#[derive(Debug, Clone, Serialize)]
pub struct TrialDetail {
    pub record: TrialRecord,
    pub noise_time: Vec<f64>,
    pub noise_reconstructed: Vec<f64>,
    pub distortion_true: Vec<f64>,
    pub distortion_estimated: Vec<f64>,
    /// `‖E⁽²⁾ − Ê⁽²⁾‖²`.
    pub lag_error: f64,
    /// `‖E_time − Ê_time‖²`.
    pub time_error: f64,
}

/// A campaign with its basis, sampler, estimator and BLE precomputed.
#[derive(Debug, Clone)]
pub struct Experiment {
    config: McConfig,
    basis: BasisMatrix,
    input: Spectrum,
    clean_output: Vec<f64>,
    sampler: NoiseSampler,
    plan: DeconvolutionPlan,
    ble: Option<BleModel>,
}

impl Experiment {
    pub fn new(config: &McConfig) -> Result<Self> {
        config.validate()?;
        let params = BasisParams::new(config.p, config.basis_len, config.horizon)?;
        let basis = BasisMatrix::new(params, config.convention)?;
        let input = Spectrum::new(config.input_spectrum.clone(), config.p);
        let clean_output = delay_time(&basis.synthesize(&input)?, config.tau_true);
        let sampler = config.noise.sampler(config.horizon)?;
        let plan = DeconvolutionPlan::new(&input, config.markov_rows + 1)?;
        let ble = match config.reduction {
            Reduction::None => None,
            Reduction::Ble => {
                let cov = CovariancePair::new(&config.noise, &basis)?;
                Some(fit_ble(&cov.sigma_lag, config.m)?)
            }
        };
        Ok(Self {
            config: config.clone(),
            basis,
            input,
            clean_output,
            sampler,
            plan,
            ble,
        })
    }

    pub fn config(&self) -> &McConfig {
        &self.config
    }

    pub fn basis(&self) -> &BasisMatrix {
        &self.basis
    }

    pub fn input(&self) -> &Spectrum {
        &self.input
    }

    pub fn clean_output(&self) -> &[f64] {
        &self.clean_output
    }

    pub fn ble(&self) -> Option<&BleModel> {
        self.ble.as_ref()
    }

    /// Noise realization and noisy measurement for `seed`.
    pub fn measurement(&self, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = self.sampler.sample(&mut rng);
        let y = self
            .clean_output
            .iter()
            .zip(&noise)
            .map(|(a, b)| a + b)
            .collect();
        (noise, y)
    }

    /// Delay estimate from the measured spectrum without noise reduction.
    pub fn estimate_raw(&self, y_meas: &[f64]) -> Result<f64> {
        let y_hat = self.basis.analyze(y_meas)?;
        Ok(estimate_with_plan(&self.plan, &y_hat, self.config.p)?.tau_hat)
    }

    /// Delay estimate after BLE noise reduction, if the campaign has one.
    pub fn estimate_reduced(&self, y_meas: &[f64]) -> Result<Option<f64>> {
        let Some(ble) = &self.ble else {
            return Ok(None);
        };
        let y_hat = self.basis.analyze(y_meas)?;
        let reduced = reduce_spectrum(&y_hat, ble)?;
        Ok(Some(
            estimate_with_plan(&self.plan, &reduced, self.config.p)?.tau_hat,
        ))
    }

    fn estimates(&self, seed: u64) -> Result<(f64, Option<f64>)> {
        let (_, y) = self.measurement(seed);
        let y_hat = self.basis.analyze(&y)?;
        let raw = estimate_with_plan(&self.plan, &y_hat, self.config.p)?.tau_hat;
        let reduced = match &self.ble {
            Some(ble) => {
                let r = reduce_spectrum(&y_hat, ble)?;
                Some(estimate_with_plan(&self.plan, &r, self.config.p)?.tau_hat)
            }
            None => None,
        };
        Ok((raw, reduced))
    }

    pub fn trial(&self, seed: u64) -> Result<TrialRecord> {
        self.trial_detail(seed).map(|d| d.record)
    }

    pub fn trial_detail(&self, seed: u64) -> Result<TrialDetail> {
        self.trial_detail_inner(seed).map_err(|e| Error::Trial {
            seed,
            source: Box::new(e),
        })
    }

    fn trial_detail_inner(&self, seed: u64) -> Result<TrialDetail> {
        let m = self.config.m;
        let (noise, y) = self.measurement(seed);
        let tau_hat_raw = self.estimate_raw(&y)?;
        let tau_hat_reduced = self.estimate_reduced(&y)?;
        let y_hat = self.basis.analyze(&y)?;
        let head_distortion = y_hat.coefficients[..m].to_vec();
        let distortion_true = self.basis.analyze(&noise)?.coefficients;
        let distortion_estimated = match &self.ble {
            Some(ble) => estimate_distortion(&head_distortion, ble)?,
            None => [
                head_distortion.as_slice(),
                &vec![0.0; self.config.basis_len - m],
            ]
            .concat(),
        };
        let tail_error: Vec<f64> = distortion_true[m..]
            .iter()
            .zip(&distortion_estimated[m..])
            .map(|(e, h)| e - h)
            .collect();
        let noise_reconstructed = self.basis.synthesize_coefficients(&distortion_estimated)?;
        let lag_error = tail_error.iter().map(|x| x * x).sum();
        let time_error = noise
            .iter()
            .zip(&noise_reconstructed)
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        Ok(TrialDetail {
            record: TrialRecord {
                seed,
                tau_hat_raw,
                tau_hat_reduced,
                head_distortion,
                tail_error,
            },
            noise_time: noise,
            noise_reconstructed,
            distortion_true,
            distortion_estimated,
            lag_error,
            time_error,
        })
    }

    fn seed(&self, index: usize) -> u64 {
        self.config.base_seed.wrapping_add(index as u64)
    }

    /// Raw and reduced estimates for every trial, in trial order.
    pub fn estimates_all(&self, execution: Execution) -> Result<Vec<(f64, Option<f64>)>> {
        let one = |i: usize| {
            let seed = self.seed(i);
            self.estimates(seed).map_err(|e| Error::Trial {
                seed,
                source: Box::new(e),
            })
        };
        match execution {
            Execution::Sequential => (0..self.config.trials).map(one).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..self.config.trials).into_par_iter().map(one).collect()
            }
        }
    }

    pub fn run(&self, execution: Execution) -> Result<McSummary> {
        let estimates = self.estimates_all(execution)?;
        Ok(McSummary::from_estimates(&self.config, &estimates))
    }
}

/// Replays trial `seed` of `config` on its own.
pub fn run_trial(config: &McConfig, seed: u64) -> Result<TrialRecord> {
    Experiment::new(config)?.trial(seed)
}

pub fn run_montecarlo(config: &McConfig) -> Result<McSummary> {
    run_montecarlo_with(config, Execution::default())
}

pub fn run_montecarlo_with(config: &McConfig, execution: Execution) -> Result<McSummary> {
    Experiment::new(config)?.run(execution)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: String,
    pub reduction: Reduction,
    pub trials: usize,
    pub mean: f64,
    /// Unbiased sample variance; zero for a single trial.
    pub var: f64,
    pub bias: f64,
}

/// Mean and standard error of `reduced − raw` over paired trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedDifference {
    pub mean: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub rows: Vec<SummaryRow>,
    pub paired: Option<PairedDifference>,
    /// Set when fewer than two trials make the variance meaningless.
    pub degenerate: bool,
    pub tau_true: usize,
    pub convention: Convention,
    pub digest: String,
}

impl McSummary {
    pub fn from_estimates(config: &McConfig, estimates: &[(f64, Option<f64>)]) -> Self {
        let raw: Vec<f64> = estimates.iter().map(|e| e.0).collect();
        let tau = config.tau_true as f64;
        let row = |reduction, values: &[f64]| {
            let (mean, var) = mean_var(values);
            SummaryRow {
                model: config.model.clone(),
                reduction,
                trials: values.len(),
                mean,
                var,
                bias: mean - tau,
            }
        };
        let mut rows = vec![row(Reduction::None, &raw)];
        let mut paired = None;
        let reduced: Option<Vec<f64>> = estimates.iter().map(|e| e.1).collect();
        if let Some(reduced) = reduced.filter(|r| !r.is_empty()) {
            rows.push(row(Reduction::Ble, &reduced));
            let diff: Vec<f64> = reduced.iter().zip(&raw).map(|(r, a)| r - a).collect();
            let (mean, var) = mean_var(&diff);
            paired = Some(PairedDifference {
                mean,
                std_err: (var / diff.len() as f64).sqrt(),
            });
        }
        Self {
            rows,
            paired,
            degenerate: estimates.len() < 2,
            tau_true: config.tau_true,
            convention: config.convention,
            digest: super::output::config_digest(config),
        }
    }

    pub fn row(&self, reduction: Reduction) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.reduction == reduction)
    }
}

/// Mean and unbiased variance, summed in slice order.
pub fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, ss / (n - 1) as f64)
}
