//! Experiment configuration and its TOML file schema.
//!
//! ```toml
//! tau_true = 4
//! p = 0.5
//! L = 20
//! T = 300
//! m = 15
//! markov_rows = 4
//! input_spectrum = [0.0, ..., 3.1, 3.0, 0.0, 0.0, 0.0]
//! trials = 100000
//! base_seed = 1
//! reduction = "ble"                 # or "none"
//! convention = "strictly_proper"    # or "shifted"
//!
//! [[noise]]
//! name = "NM1"
//! kind = "white"
//! lambda = 0.3
//!
//! [[noise]]
//! name = "NM2"
//! kind = "colored"
//! lambda = 0.3
//! denominator = [1.0, -0.9464, 0.7408]
//!
//! [[noise]]
//! name = "NM3"
//! kind = "laguerre_from_colored"
//! lambda = 0.3
//! denominator = [1.0, -0.9464, 0.7408]
//! p_e = 0.5
//! K = 19
//! ```
//!
//! A `kind = "laguerre"` block takes `p_e`, `K` and an explicit `coef_cov` (array of rows).

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::Convention;
use crate::error::{Error, Result};
use crate::noise::{nm3_from_colored_with, time_covariance, NoiseModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    #[default]
    None,
    Ble,
}

impl Reduction {
    pub fn as_str(self) -> &'static str {
        match self {
            Reduction::None => "none",
            Reduction::Ble => "ble",
        }
    }
}

/// One Monte Carlo campaign: a single noise model on a fixed experiment design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    /// Label carried into summaries.
    pub model: String,
    pub tau_true: usize,
    pub p: f64,
    #[serde(rename = "L")]
    pub basis_len: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub m: usize,
    pub markov_rows: usize,
    pub input_spectrum: Vec<f64>,
    pub noise: NoiseModel,
    pub trials: usize,
    pub base_seed: u64,
    pub reduction: Reduction,
    #[serde(default)]
    pub convention: Convention,
}

impl McConfig {
    /// Reference design: τ = 4, p = 0.5, L = 20, T = 300, m = 15,
    /// `U = (15 zeros, 3.1, 3, 0, 0, 0)`, five Markov estimates.
    pub fn reference(model: impl Into<String>, noise: NoiseModel) -> Self {
        let mut input = vec![0.0; 20];
        input[15] = 3.1;
        input[16] = 3.0;
        Self {
            model: model.into(),
            tau_true: 4,
            p: 0.5,
            basis_len: 20,
            horizon: 300,
            m: 15,
            markov_rows: 4,
            input_spectrum: input,
            noise,
            trials: 100_000,
            base_seed: 1,
            reduction: Reduction::Ble,
            convention: Convention::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.trials < 1 {
            return fail("trials must be at least 1".into());
        }
        if self.tau_true < 1 {
            return fail("tau_true must be at least 1".into());
        }
        if !(self.m >= 1 && self.m < self.basis_len) {
            return fail(format!(
                "m = {} must satisfy 1 ≤ m < L = {}",
                self.m, self.basis_len
            ));
        }
        if self.input_spectrum.len() != self.basis_len {
            return fail(format!(
                "input_spectrum has {} entries, expected L = {}",
                self.input_spectrum.len(),
                self.basis_len
            ));
        }
        if self.input_spectrum[..self.m].iter().any(|&u| u != 0.0) {
            return fail(format!(
                "input_spectrum must be zero below index m = {}",
                self.m
            ));
        }
        let Some(n) = self.input_spectrum.iter().position(|&u| u != 0.0) else {
            return fail("input_spectrum is identically zero".into());
        };
        if self.markov_rows < 3 {
            return fail("markov_rows must be at least 3".into());
        }
        if n + self.markov_rows + 1 > self.basis_len {
            return fail(format!(
                "markov_rows = {} needs {} coefficients from index {n}, but L = {}",
                self.markov_rows,
                self.markov_rows + 1,
                self.basis_len
            ));
        }
        self.noise.validate()
    }
}

/// Noise block as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    White {
        lambda: f64,
    },
    Colored {
        lambda: f64,
        denominator: Vec<f64>,
    },
    Laguerre {
        p_e: f64,
        #[serde(rename = "K")]
        k: usize,
        coef_cov: Vec<Vec<f64>>,
    },
    LaguerreFromColored {
        lambda: f64,
        denominator: Vec<f64>,
        p_e: f64,
        #[serde(rename = "K")]
        k: usize,
    },
}

impl NoiseSpec {
    pub fn resolve(&self, horizon: usize, convention: Convention) -> Result<NoiseModel> {
        let model = match self {
            NoiseSpec::White { lambda } => NoiseModel::white(*lambda),
            NoiseSpec::Colored {
                lambda,
                denominator,
            } => NoiseModel::colored(*lambda, denominator.clone()),
            NoiseSpec::Laguerre { p_e, k, coef_cov } => {
                let n = k + 1;
                if coef_cov.len() != n || coef_cov.iter().any(|r| r.len() != n) {
                    return Err(Error::Config(format!("coef_cov must be {n}×{n}")));
                }
                NoiseModel::LaguerreCombination {
                    p_e: *p_e,
                    k: *k,
                    coef_cov: DMatrix::from_fn(n, n, |i, j| coef_cov[i][j]),
                    convention,
                }
            }
            NoiseSpec::LaguerreFromColored {
                lambda,
                denominator,
                p_e,
                k,
            } => {
                let colored = NoiseModel::colored(*lambda, denominator.clone());
                let sigma = time_covariance(&colored, horizon)?;
                nm3_from_colored_with(&sigma, *p_e, *k, horizon, convention)?
            }
        };
        model.validate()?;
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedNoise {
    pub name: String,
    #[serde(flatten)]
    pub spec: NoiseSpec,
}

/// Parsed config file: a shared design plus one or more noise models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub tau_true: usize,
    pub p: f64,
    #[serde(rename = "L")]
    pub basis_len: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub m: usize,
    #[serde(default = "default_markov_rows")]
    pub markov_rows: usize,
    pub input_spectrum: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub reduction: Reduction,
    #[serde(default)]
    pub convention: Convention,
    pub noise: Vec<NamedNoise>,
}

fn default_markov_rows() -> usize {
    4
}

fn default_trials() -> usize {
    100_000
}

impl ExperimentFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if file.noise.is_empty() {
            return Err(Error::Config(
                "at least one [[noise]] block is required".into(),
            ));
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// One validated campaign config per noise block.
    pub fn campaigns(&self) -> Result<Vec<McConfig>> {
        self.noise
            .iter()
            .map(|named| {
                let cfg = McConfig {
                    model: named.name.clone(),
                    tau_true: self.tau_true,
                    p: self.p,
                    basis_len: self.basis_len,
                    horizon: self.horizon,
                    m: self.m,
                    markov_rows: self.markov_rows,
                    input_spectrum: self.input_spectrum.clone(),
                    noise: named.spec.resolve(self.horizon, self.convention)?,
                    trials: self.trials,
                    base_seed: self.base_seed,
                    reduction: self.reduction,
                    convention: self.convention,
                };
                cfg.validate()?;
                Ok(cfg)
            })
            .collect()
    }
}

/// Parses `start:stop:step` into an inclusive grid.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || Error::Config(format!("grid `{text}` must look like start:stop:step"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if step.is_nan() || step <= 0.0 || stop < start {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}
