//! Monomial power-series polynomials in time.
//!
//! Trial solutions are written in raw `t` with no domain mapping, so a
//! degree-5 piece on `[3, 6]` carries `t^5 = 7776` in its last column. That
//! stays well conditioned for the degrees and spans used here; larger ones
//! trigger a logged warning through [`check_conditioning`].

use crate::error::{Result, SsmError};

/// Degree above which a warning is logged.
pub const WARN_DEGREE: usize = 8;
/// Absolute time above which a warning is logged.
pub const WARN_TIME: f64 = 10.0;

/// A polynomial `c_0 + c_1 t + ... + c_N t^N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coefficients: Vec<f64>,
}

impl Polynomial {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(SsmError::InvalidInput(
                "a polynomial needs at least one coefficient".into(),
            ));
        }
        Ok(Polynomial { coefficients })
    }

    pub fn zero(degree: usize) -> Self {
        Polynomial {
            coefficients: vec![0.0; degree + 1],
        }
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.coefficients
    }

    /// Horner evaluation. At `t == 0` this returns `c_0` exactly.
    pub fn eval(&self, t: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    /// Coefficients `(1 c_1, 2 c_2, ..., N c_N)`; the derivative of a
    /// constant is the zero constant.
    pub fn derivative(&self) -> Polynomial {
        if self.coefficients.len() == 1 {
            return Polynomial::zero(0);
        }
        let coefficients = self
            .coefficients
            .iter()
            .enumerate()
            .skip(1)
            .map(|(n, &c)| n as f64 * c)
            .collect();
        Polynomial { coefficients }
    }
}

/// The Vandermonde row `(1, t, t^2, ..., t^N)`.
pub fn power_row(degree: usize, t: f64) -> Vec<f64> {
    let mut row = Vec::with_capacity(degree + 1);
    let mut p = 1.0;
    row.push(p);
    for _ in 0..degree {
        p *= t;
        row.push(p);
    }
    row
}

/// Time derivative of [`power_row`]: `(0, 1, 2t, 3t^2, ..., N t^(N-1))`.
pub fn derivative_row(degree: usize, t: f64) -> Vec<f64> {
    let powers = power_row(degree, t);
    let mut row = Vec::with_capacity(degree + 1);
    row.push(0.0);
    for n in 1..=degree {
        row.push(n as f64 * powers[n - 1]);
    }
    row
}

pub fn dot(row: &[f64], coefficients: &[f64]) -> f64 {
    row.iter().zip(coefficients).map(|(r, c)| r * c).sum()
}

/// Logs a warning when a raw-`t` monomial basis is likely to be poorly
/// conditioned. Returns whether a warning was emitted.
pub fn check_conditioning(degree: usize, times: &[f64]) -> bool {
    let t_max = times.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let warn = degree > WARN_DEGREE || t_max > WARN_TIME;
    if warn {
        log::warn!("monomial basis of degree {degree} over |t| <= {t_max} may be ill-conditioned");
    }
    warn
}
