//! Fractional-differencing weights of `(1 - B)^d = Σ_j π_j(d) B^j` and their
//! first and second derivatives in `d`.
//!
//! Everything here is computed from the product recursion
//! `π_j = π_{j-1} (j - 1 - d) / j` and its term-by-term derivatives, which are
//! smooth through `d = 0`. The digamma/trigamma closed forms are kept in
//! [`closed_form`] for cross-checking; they are singular at `d = 0`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::special::{digamma, ln_gamma, trigamma};

/// How many past observations enter the autoregressive sum at each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "TruncationRepr", into = "TruncationRepr")]
pub enum Truncation {
    /// All available history (`t - 1` terms at time `t`).
    #[default]
    Full,
    /// At most `m` most recent observations.
    Fixed(usize),
}

impl Truncation {
    /// Number of lags usable when `available` past values exist.
    #[inline]
    pub fn limit(self, available: usize) -> usize {
        match self {
            Truncation::Full => available,
            Truncation::Fixed(m) => m.min(available),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TruncationRepr {
    Lags(usize),
    Name(String),
}

impl TryFrom<TruncationRepr> for Truncation {
    type Error = String;

    fn try_from(r: TruncationRepr) -> Result<Self, Self::Error> {
        match r {
            TruncationRepr::Lags(0) => Err("truncation must be at least 1 lag".into()),
            TruncationRepr::Lags(m) => Ok(Truncation::Fixed(m)),
            TruncationRepr::Name(s) if s == "full" => Ok(Truncation::Full),
            TruncationRepr::Name(s) => Err(format!("unknown truncation `{s}` (use \"full\" or a lag count)")),
        }
    }
}

impl From<Truncation> for TruncationRepr {
    fn from(t: Truncation) -> Self {
        match t {
            Truncation::Full => TruncationRepr::Name("full".into()),
            Truncation::Fixed(m) => TruncationRepr::Lags(m),
        }
    }
}

/// Coefficients `π_1..π_m`, `ν_1..ν_m = ∂π/∂d` and optionally `∂²π/∂d²`
/// for one value of `d`. Index `k` of each vector holds lag `k + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FracCoefs {
    pub d: f64,
    pub pi: Vec<f64>,
    pub nu: Vec<f64>,
    pub d2pi: Option<Vec<f64>>,
}

impl FracCoefs {
    pub fn new(d: f64, m: usize) -> Self {
        let (pi, nu, _) = recursion(d, m, false);
        Self { d, pi, nu, d2pi: None }
    }

    pub fn with_second_derivative(d: f64, m: usize) -> Self {
        let (pi, nu, d2pi) = recursion(d, m, true);
        Self { d, pi, nu, d2pi: Some(d2pi) }
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }
}

fn recursion(d: f64, m: usize, second: bool) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut pi = Vec::with_capacity(m);
    let mut nu = Vec::with_capacity(m);
    let mut d2 = Vec::with_capacity(if second { m } else { 0 });
    let (mut p, mut n, mut c) = (1.0_f64, 0.0_f64, 0.0_f64);
    for j in 1..=m {
        let jf = j as f64;
        let ratio = (jf - 1.0 - d) / jf;
        c = c * ratio - 2.0 * n / jf;
        n = n * ratio - p / jf;
        p *= ratio;
        pi.push(p);
        nu.push(n);
        if second {
            d2.push(c);
        }
    }
    (pi, nu, d2)
}

/// `π_1(d)..π_m(d)`.
pub fn pi_coeffs(d: f64, m: usize) -> Vec<f64> {
    recursion(d, m, false).0
}

/// `ν_j(d) = ∂π_j/∂d` for `j = 1..m`.
pub fn nu_coeffs(d: f64, m: usize) -> Vec<f64> {
    recursion(d, m, false).1
}

/// `∂²π_j/∂d²` for `j = 1..m`.
pub fn d2pi_coeffs(d: f64, m: usize) -> Vec<f64> {
    recursion(d, m, true).2
}

/// Inner products of the coefficient sequences with a lagged history.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ArSums {
    /// `Σ π_j(d) y_{t-j}`
    pub pi_dot: f64,
    /// `Σ ν_j(d) y_{t-j}`
    pub nu_dot: f64,
    pub lags: usize,
}

const RECIP_LEN: usize = 1 << 15;

/// `1/j` for `j < RECIP_LEN`.
fn reciprocals() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| (0..RECIP_LEN).map(|j| if j == 0 { 0.0 } else { 1.0 / j as f64 }).collect())
}

/// Accumulates `Σ_{j=1..L} π_j(d) x_j` and `Σ ν_j(d) x_j`, where `recent_first`
/// yields `x_1 = y_{t-1}, x_2 = y_{t-2}, ...` and `L = limit` at most.
///
/// Coefficients are generated on the fly; nothing is allocated.
#[inline]
pub fn weighted_sums<I>(d: f64, recent_first: I, limit: usize) -> ArSums
where
    I: IntoIterator<Item = f64>,
{
    let recip = reciprocals();
    let (mut p, mut n) = (1.0_f64, 0.0_f64);
    let (mut pi_dot, mut nu_dot) = (0.0, 0.0);
    let mut lags = 0;
    for (k, x) in recent_first.into_iter().take(limit).enumerate() {
        let j = k + 1;
        let jf = j as f64;
        let inv = if j < RECIP_LEN { recip[j] } else { 1.0 / jf };
        let ratio = (jf - 1.0 - d) * inv;
        n = n * ratio - p * inv;
        p *= ratio;
        pi_dot += p * x;
        nu_dot += n * x;
        lags = j;
    }
    ArSums { pi_dot, nu_dot, lags }
}

/// Gamma-function and digamma/trigamma expressions for the same quantities.
///
/// Valid for `d ∉ {0, 1, 2, ...}`; kept as independent references for the
/// recursions above.
pub mod closed_form {
    use super::*;

    /// `Γ(j - d) / (Γ(-d) Γ(j + 1))` through log-gamma with explicit sign.
    pub fn pi_coeffs(d: f64, m: usize) -> Vec<f64> {
        // Γ(-d) = Γ(1 - d) / (-d); valid for d < 1, d != 0.
        let ln_abs_gamma_neg_d = ln_gamma(1.0 - d) - d.abs().ln();
        let sign = if -d < 0.0 { -1.0 } else { 1.0 };
        (1..=m)
            .map(|j| {
                let jf = j as f64;
                sign * (ln_gamma(jf - d) - ln_abs_gamma_neg_d - ln_gamma(jf + 1.0)).exp()
            })
            .collect()
    }

    /// `π_j (-Ψ(j - d) + Ψ(1 - d) + 1/d)`.
    pub fn nu_coeffs(d: f64, m: usize) -> Vec<f64> {
        let pi = super::pi_coeffs(d, m);
        let base = digamma(1.0 - d) + 1.0 / d;
        pi.iter()
            .enumerate()
            .map(|(k, p)| p * (base - digamma((k + 1) as f64 - d)))
            .collect()
    }

    /// `ν_j (-Ψ(j-d) + Ψ(1-d) + 1/d) + π_j (Ψ'(j-d) - Ψ'(1-d) - 1/d²)`.
    pub fn d2pi_coeffs(d: f64, m: usize) -> Vec<f64> {
        let pi = super::pi_coeffs(d, m);
        let nu = nu_coeffs(d, m);
        let a = digamma(1.0 - d) + 1.0 / d;
        let b = trigamma(1.0 - d) + 1.0 / (d * d);
        (0..m)
            .map(|k| {
                let x = (k + 1) as f64 - d;
                nu[k] * (a - digamma(x)) + pi[k] * (trigamma(x) - b)
            })
            .collect()
    }
}
