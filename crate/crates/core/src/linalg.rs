//! Small dense helpers shared by the covariance and estimation code.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative jitter added to the diagonal when a covariance is repaired.
pub const JITTER_SCALE: f64 = 1e-10;

/// Negative eigenvalues smaller than this fraction of the trace count as round-off.
const PSD_ROUNDOFF: f64 = 1e-8;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn trace_scale(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows().max(1) as f64;
    (m.trace().abs() / n).max(f64::MIN_POSITIVE)
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Symmetrizes `m` and, if its smallest eigenvalue is negative within round-off,
/// adds `JITTER_SCALE * trace / n` to the diagonal.
pub fn repair_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut sym = symmetrize(m);
    let n = sym.nrows();
    if n == 0 {
        return Ok(sym);
    }
    let min_eig = min_eigenvalue(&sym);
    if min_eig >= 0.0 {
        return Ok(sym);
    }
    let scale = trace_scale(&sym);
    if min_eig < -PSD_ROUNDOFF * scale {
        return Err(Error::NotPositiveSemidefinite {
            min_eigenvalue: min_eig,
        });
    }
    let jitter = JITTER_SCALE * sym.trace() / n as f64 + (-min_eig);
    for i in 0..n {
        sym[(i, i)] += jitter;
    }
    Ok(sym)
}

/// Returns `S` with `S Sᵀ = m` for a symmetric PSD `m`, built from its eigendecomposition.
/// Works for singular (including zero) matrices.
pub fn psd_factor(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = symmetrize(m);
    let n = sym.nrows();
    if n == 0 {
        return Ok(sym);
    }
    let scale = trace_scale(&sym);
    let eig = sym.symmetric_eigen();
    let mut factor = eig.eigenvectors.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda < -PSD_ROUNDOFF * scale {
            return Err(Error::NotPositiveSemidefinite {
                min_eigenvalue: lambda,
            });
        }
        let s = lambda.max(0.0).sqrt();
        factor.column_mut(j).scale_mut(s);
    }
    Ok(factor)
}

/// Largest absolute difference between entries on the same diagonal,
/// `max |m[i+1, j+1] - m[i, j]|`. Zero exactly for Toeplitz matrices.
pub fn toeplitz_deviation(m: &DMatrix<f64>) -> f64 {
    let (r, c) = m.shape();
    let mut dev = 0.0f64;
    for j in 0..c.saturating_sub(1) {
        for i in 0..r.saturating_sub(1) {
            dev = dev.max((m[(i + 1, j + 1)] - m[(i, j)]).abs());
        }
    }
    dev
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
