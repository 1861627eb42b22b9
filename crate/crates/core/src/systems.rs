//! Laguerre-domain state space of time-domain LTI systems and the pure delay.

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::basis::Spectrum;
use crate::error::{Error, Result};

/// `x(t+1) = A x(t) + B u(t)`, `y(t) = C x(t)`, zero initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeStateSpace {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: RowDVector<f64>,
}

impl TimeStateSpace {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: RowDVector<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: a.ncols(),
                context: "A must be square",
            });
        }
        if b.len() != n || c.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: if b.len() != n { b.len() } else { c.len() },
                context: "B and C must match the state dimension",
            });
        }
        Ok(Self { a, b, c })
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// Output for input `u` starting from rest.
    pub fn simulate(&self, u: &[f64]) -> Vec<f64> {
        let mut x = DVector::zeros(self.order());
        u.iter()
            .map(|&ut| {
                let y = (&self.c * &x)[0];
                x = &self.a * &x + &self.b * ut;
                y
            })
            .collect()
    }
}

/// `x_{j+1} = F x_j + G u_j`, `y_j = H x_j + J u_j` acting on Laguerre coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct LaguerreStateSpace {
    pub f: DMatrix<f64>,
    pub g: DVector<f64>,
    pub h: RowDVector<f64>,
    pub j: f64,
    pub p: f64,
}

impl LaguerreStateSpace {
    /// Runs the coefficient recursion over an input spectrum.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut x = DVector::zeros(self.f.nrows());
        u.iter()
            .map(|&uj| {
                let y = (&self.h * &x)[0] + self.j * uj;
                x = &self.f * &x + &self.g * uj;
                y
            })
            .collect()
    }

    /// `H F^(k-1) G` for `k = 1..=count`.
    pub fn markov(&self, count: usize) -> Vec<f64> {
        let mut v = self.g.clone();
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            out.push((&self.h * &v)[0]);
            v = &self.f * v;
        }
        out
    }
}

/// Maps a time-domain LTI system to its Laguerre-domain realization:
///
/// ```text
/// F = (I − √p A)⁻¹ (A − √p I)     G = (1 − p)(I − √p A)⁻¹ B
/// H = C (I − √p A)⁻¹              J = √p C (I − √p A)⁻¹ B
/// ```
pub fn lti_to_laguerre(sys: &TimeStateSpace, p: f64) -> Result<LaguerreStateSpace> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "Laguerre parameter p = {p} outside [0, 1)"
        )));
    }
    let n = sys.order();
    let sp = p.sqrt();
    let id = DMatrix::<f64>::identity(n, n);
    let m = &id - &sys.a * sp;
    let inv = m
        .lu()
        .try_inverse()
        .ok_or(Error::Singular("I − √p·A is not invertible"))?;
    let f = &inv * (&sys.a - &id * sp);
    let g = (&inv * &sys.b) * (1.0 - p);
    let h = &sys.c * &inv;
    let j = sp * (&h * &sys.b)[0];
    Ok(LaguerreStateSpace { f, g, h, j, p })
}

/// Shift-register realization of `y(t) = u(t − τ)`: `A` is the τ×τ down-shift,
/// `B = e_0`, `C = e_{τ−1}ᵀ`.
pub fn delay_state_space(tau: usize) -> Result<TimeStateSpace> {
    if tau < 1 {
        return Err(Error::InvalidParameter("delay τ must be at least 1".into()));
    }
    let a = DMatrix::from_fn(tau, tau, |i, j| if i == j + 1 { 1.0 } else { 0.0 });
    let mut b = DVector::zeros(tau);
    b[0] = 1.0;
    let mut c = RowDVector::zeros(tau);
    c[tau - 1] = 1.0;
    TimeStateSpace::new(a, b, c)
}

/// Binomial coefficient with `C(n, k) = 0` for `k > n`.
pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    if let Some(v) = binomial_exact(n, k) {
        return v as f64;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |f, j| f * (n - j) as f64 / (j + 1) as f64)
}

/// `(−√p)^k` evaluated by sign and log-magnitude, valid for negative `k`.
fn signed_root_power(p: f64, k: i64) -> f64 {
    let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    sign * (k as f64 * 0.5 * p.ln()).exp()
}

/// Exact integer `C(n, k)`, or `None` on overflow.
fn binomial_exact(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i + 1) as u128;
    }
    Some(acc)
}

/// Double-double value `hi + lo`.
#[derive(Clone, Copy)]
struct TwoFloat {
    hi: f64,
    lo: f64,
}

impl TwoFloat {
    fn from_u128(v: u128) -> Self {
        let hi = v as f64;
        let rest = v as i128 - hi as i128;
        Self {
            hi,
            lo: rest as f64,
        }
    }

    fn renorm(s: f64, e: f64) -> Self {
        let hi = s + e;
        Self {
            hi,
            lo: e - (hi - s),
        }
    }

    fn mul_f64(self, x: f64) -> Self {
        let p = self.hi * x;
        let e = self.hi.mul_add(x, -p) + self.lo * x;
        Self::renorm(p, e)
    }

    fn add(self, o: Self) -> Self {
        let s = self.hi + o.hi;
        let bb = s - self.hi;
        let e = (self.hi - (s - bb)) + (o.hi - bb) + self.lo + o.lo;
        Self::renorm(s, e)
    }
}

/// `L_m^{(τ)}(√p) = (−√p)^{m−τ} Σ_{n=0}^{τ−1} C(m+n, n) C(m−1, τ−n−1) (−p)^n`.
///
/// The alternating sum cancels heavily for p near 1, so it is evaluated by Horner's
/// rule in double-double arithmetic on exact integer coefficients.
pub fn delay_polynomial(m: usize, tau: usize, p: f64) -> f64 {
    assert!(
        m >= 1 && tau >= 1,
        "delay_polynomial requires m ≥ 1 and τ ≥ 1"
    );
    let (m64, tau64) = (m as u64, tau as u64);
    let exact: Option<Vec<u128>> = (0..tau64)
        .map(|n| binomial_exact(m64 + n, n)?.checked_mul(binomial_exact(m64 - 1, tau64 - n - 1)?))
        .collect();
    let sum = match exact {
        Some(coef) => {
            coef.iter()
                .rev()
                .fold(TwoFloat { hi: 0.0, lo: 0.0 }, |acc, &c| {
                    acc.mul_f64(-p).add(TwoFloat::from_u128(c))
                })
                .hi
        }
        None => (0..tau64)
            .map(|n| binomial(m64 + n, n) * binomial(m64 - 1, tau64 - n - 1) * (-p).powi(n as i32))
            .sum(),
    };
    signed_root_power(p, m as i64 - tau as i64) * sum
}

/// Output Laguerre spectrum of the pure delay:
/// `y_j = (1−p) Σ_{k<j} L_{j−k}^{(τ)}(√p) u_k + √p^τ u_j`.
pub fn delay_spectrum(u: &Spectrum, tau: usize, p: f64) -> Result<Spectrum> {
    if tau < 1 {
        return Err(Error::InvalidParameter("delay τ must be at least 1".into()));
    }
    let n = u.len();
    let kernel: Vec<f64> = (0..n)
        .map(|d| {
            if d == 0 {
                p.sqrt().powi(tau as i32)
            } else {
                (1.0 - p) * delay_polynomial(d, tau, p)
            }
        })
        .collect();
    let uc = u.as_slice();
    let y = (0..n)
        .map(|j| (0..=j).map(|k| kernel[j - k] * uc[k]).sum())
        .collect();
    Ok(Spectrum::new(y, p))
}

/// Markov parameters of the Laguerre-domain delay.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovSequence {
    /// `h_0 = J = √p^τ`.
    pub throughput: f64,
    /// `h_1..h_N`.
    pub h: Vec<f64>,
    pub tau: usize,
    pub p: f64,
}

impl MarkovSequence {
    /// `h_0, h_1, .., h_N` as one vector.
    pub fn with_throughput(&self) -> Vec<f64> {
        std::iter::once(self.throughput)
            .chain(self.h.iter().copied())
            .collect()
    }

    /// `max_j |h_j − (1−p) L_j^{(τ)}(√p)|`.
    pub fn polynomial_deviation(&self) -> f64 {
        self.h
            .iter()
            .enumerate()
            .map(|(i, &h)| (h - (1.0 - self.p) * delay_polynomial(i + 1, self.tau, self.p)).abs())
            .fold(0.0, f64::max)
    }
}

/// `h_j = H_τ F_τ^(j−1) G_τ` from the state-space realization of the delay.
pub fn markov_parameters(tau: usize, p: f64, count: usize) -> Result<MarkovSequence> {
    if count < 1 {
        return Err(Error::InvalidParameter(
            "need at least one Markov parameter".into(),
        ));
    }
    let lag = lti_to_laguerre(&delay_state_space(tau)?, p)?;
    Ok(MarkovSequence {
        throughput: lag.j,
        h: lag.markov(count),
        tau,
        p,
    })
}

/// `y(t) = u(t − τ)` on a fixed horizon, zero before `τ`.
pub fn delay_time(u: &[f64], tau: usize) -> Vec<f64> {
    let n = u.len();
    let mut y = vec![0.0; n];
    if tau < n {
        y[tau..].copy_from_slice(&u[..n - tau]);
    }
    y
}
