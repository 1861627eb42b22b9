//! Configuration-driven trials and Monte Carlo campaigns.

pub mod config;
pub mod montecarlo;
pub mod output;

pub use config::{parse_grid, ExperimentFile, McConfig, NamedNoise, NoiseSpec, Reduction};
pub use montecarlo::{
    mean_var, run_montecarlo, run_montecarlo_with, run_trial, Execution, Experiment, McSummary,
    PairedDifference, SummaryRow, TrialDetail, TrialRecord,
};

use nalgebra::DMatrix;

use crate::basis::{BasisMatrix, BasisParams, Convention};
use crate::error::Result;
use crate::noise::{laguerre_covariance, time_covariance, NoiseModel};

/// `Σ_lag` of `noise` for each Laguerre parameter in `p_grid`.
pub fn covariance_map(
    noise: &NoiseModel,
    basis_len: usize,
    horizon: usize,
    p_grid: &[f64],
    convention: Convention,
) -> Result<Vec<(f64, DMatrix<f64>)>> {
    let sigma_time = time_covariance(noise, horizon)?;
    p_grid
        .iter()
        .map(|&p| {
            let basis = BasisMatrix::new(BasisParams::new(p, basis_len, horizon)?, convention)?;
            Ok((p, laguerre_covariance(&sigma_time, &basis)?))
        })
        .collect()
}
