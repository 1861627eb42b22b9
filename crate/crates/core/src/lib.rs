//! Laguerre-domain signal representation, disturbance models, BLE noise
//! reduction and closed-form estimation of a pure time delay.
//!
//! The pipeline for one measurement:
//!
//! 1. [`basis`] samples the discrete Laguerre functions and projects signals onto them.
//! 2. [`systems`] maps the delay to the Laguerre domain and gives its Markov parameters.
//! 3. [`noise`] draws white, colored, or Laguerre-combination disturbances and their covariances.
//! 4. [`reduction`] reads the pure-noise head of the spectrum and predicts the tail.
//! 5. [`delay`] deconvolves Markov estimates and solves for τ.
//!
//! [`experiment`] runs seeded trials and Monte Carlo campaigns on top of these.

pub mod basis;
pub mod delay;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod noise;
pub mod reduction;
pub mod systems;

pub use basis::{build_basis, BasisMatrix, BasisParams, Convention, Spectrum};
pub use delay::{
    build_ab, deconvolve_markov, estimate_delay, estimate_delay_scalar, estimate_from_spectra,
    DeconvolutionPlan, DelayEstimate,
};
pub use error::{Error, Result};
pub use noise::{
    laguerre_covariance, nm3_from_colored, sample, time_covariance, CovariancePair, NoiseModel,
    NoiseSampler,
};
pub use reduction::{
    ble_tail, extract_head_distortion, fit_ble, reconstruct_noise_plain, reduce_noise, BleModel,
    PartitionedSpectrum,
};
pub use systems::{
    delay_polynomial, delay_spectrum, delay_state_space, delay_time, lti_to_laguerre,
    markov_parameters, LaguerreStateSpace, MarkovSequence, TimeStateSpace,
};
