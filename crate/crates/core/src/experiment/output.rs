//! CSV and JSON writers. CSV values carry 6 significant digits; JSON keeps full precision.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::McConfig;
use super::montecarlo::{McSummary, TrialDetail};
use crate::basis::{BasisMatrix, Convention};
use crate::error::{Error, Result};

/// SHA-256 of the config's canonical JSON form.
pub fn config_digest(config: &McConfig) -> String {
    let json = serde_json::to_vec(config).expect("config serializes");
    let hash = Sha256::digest(&json);
    hash.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Formats `x` with 6 significant digits.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // "0.100000" style rounding can bump the exponent; re-check length
        if s.trim_start_matches('-')
            .replace('.', "")
            .trim_start_matches('0')
            .len()
            > 6
            && decimals > 0
        {
            let d = decimals - 1;
            return format!("{x:.d$}");
        }
        s
    } else {
        format!("{x:.5e}")
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    text.push('\n');
    write_file(path, &text)
}

pub fn summary_csv(summaries: &[McSummary]) -> String {
    let mut out = String::from("model,reduction,trials,mean,var,bias\n");
    for row in summaries.iter().flat_map(|s| &s.rows) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            row.model,
            row.reduction.as_str(),
            row.trials,
            sig6(row.mean),
            sig6(row.var),
            sig6(row.bias)
        );
    }
    out
}

/// Writes `summary.csv` and `summary.json` into `dir`.
pub fn write_summaries(summaries: &[McSummary], dir: &Path) -> Result<()> {
    write_file(&dir.join("summary.csv"), &summary_csv(summaries))?;
    write_json(&dir.join("summary.json"), summaries)
}

#[derive(Serialize)]
struct TrialReport<'a> {
    model: &'a str,
    seed: u64,
    convention: Convention,
    digest: String,
    tau_true: usize,
    tau_hat_raw: f64,
    tau_hat_reduced: Option<f64>,
    lag_error: f64,
    time_error: f64,
}

/// Writes `{prefix}distortion.csv`, `{prefix}noise_time.csv` and `{prefix}trial.json`.
pub fn write_trial(
    detail: &TrialDetail,
    config: &McConfig,
    dir: &Path,
    prefix: &str,
) -> Result<()> {
    let mut dist = String::from("k,true,estimated\n");
    for (k, (t, e)) in detail
        .distortion_true
        .iter()
        .zip(&detail.distortion_estimated)
        .enumerate()
    {
        let _ = writeln!(dist, "{k},{},{}", sig6(*t), sig6(*e));
    }
    write_file(&dir.join(format!("{prefix}distortion.csv")), &dist)?;

    let mut time = String::from("t,true,reconstructed\n");
    for (t, (a, b)) in detail
        .noise_time
        .iter()
        .zip(&detail.noise_reconstructed)
        .enumerate()
    {
        let _ = writeln!(time, "{t},{},{}", sig6(*a), sig6(*b));
    }
    write_file(&dir.join(format!("{prefix}noise_time.csv")), &time)?;

    let report = TrialReport {
        model: &config.model,
        seed: detail.record.seed,
        convention: config.convention,
        digest: config_digest(config),
        tau_true: config.tau_true,
        tau_hat_raw: detail.record.tau_hat_raw,
        tau_hat_reduced: detail.record.tau_hat_reduced,
        lag_error: detail.lag_error,
        time_error: detail.time_error,
    };
    write_json(&dir.join(format!("{prefix}trial.json")), &report)
}

pub fn covmap_csv(blocks: &[(f64, DMatrix<f64>)]) -> String {
    let mut out = String::from("p,row,col,value\n");
    for (p, m) in blocks {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let _ = writeln!(out, "{},{i},{j},{}", sig6(*p), sig6(m[(i, j)]));
            }
        }
    }
    out
}

pub fn write_covmap(blocks: &[(f64, DMatrix<f64>)], path: &Path) -> Result<()> {
    write_file(path, &covmap_csv(blocks))
}

pub fn basis_csv(basis: &BasisMatrix) -> String {
    let l = basis.len();
    let mut out = String::from("t");
    for j in 0..l {
        let _ = write!(out, ",l{j}");
    }
    out.push('\n');
    let phi = basis.phi();
    for t in 0..basis.horizon() {
        let _ = write!(out, "{t}");
        for j in 0..l {
            let _ = write!(out, ",{}", sig6(phi[(t, j)]));
        }
        out.push('\n');
    }
    out
}

pub fn write_basis(basis: &BasisMatrix, path: &Path) -> Result<()> {
    write_file(path, &basis_csv(basis))
}
