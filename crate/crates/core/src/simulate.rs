//! Synthetic FI(d) and time-varying FI paths.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, Error, Result};
use crate::fraccore::{weighted_sums, Truncation};
use crate::rng::stream_rng;
use crate::special::norm_cdf;

/// Shape of the memory-parameter path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DgpKind {
    Constant { d: f64 },
    /// `d_t = 0.1 + 0.3 t / n`
    LinearTrend,
    /// `d_t = 0.1 + 0.3 Φ((t - n/2) / (3 √n))`
    LogisticRegime,
    CustomPath { path: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    #[serde(flatten)]
    pub kind: DgpKind,
    pub n: usize,
    pub sigma: f64,
    pub seed: u64,
    /// Leading observations generated at `d_1` and discarded.
    #[serde(default)]
    pub burn_in: usize,
}

impl DgpSpec {
    pub fn new(kind: DgpKind, n: usize, sigma: f64, seed: u64) -> Self {
        Self {
            kind,
            n,
            sigma,
            seed,
            burn_in: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid_param("n", "must be positive"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(invalid_param("sigma", "must be positive and finite"));
        }
        match &self.kind {
            DgpKind::Constant { d } if !(d.abs() < 0.5) => {
                Err(invalid_param("d", "must lie in (-0.5, 0.5)"))
            }
            DgpKind::CustomPath { path } if path.len() != self.n => Err(Error::LengthMismatch {
                left: path.len(),
                right: self.n,
            }),
            DgpKind::CustomPath { path } if path.iter().any(|d| !(d.abs() < 0.5)) => {
                Err(invalid_param("path", "every d_t must lie in (-0.5, 0.5)"))
            }
            _ => Ok(()),
        }
    }
}

/// Deterministic `d_1..d_n` for the spec.
pub fn dt_path(spec: &DgpSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let n = spec.n;
    let nf = n as f64;
    let path = match &spec.kind {
        DgpKind::Constant { d } => vec![*d; n],
        DgpKind::LinearTrend => (1..=n).map(|t| 0.1 + 0.3 * t as f64 / nf).collect(),
        DgpKind::LogisticRegime => {
            let scale = 3.0 * nf.sqrt();
            (1..=n)
                .map(|t| 0.1 + 0.3 * norm_cdf((t as f64 - nf / 2.0) / scale))
                .collect()
        }
        DgpKind::CustomPath { path } => path.clone(),
    };
    Ok(path)
}

/// Draws `y_t = ε_t - Σ_{j=1..min(t-1,m)} π_j(d_t) y_{t-j}` with the time-`t`
/// coefficient set and `ε_t ~ N(0, σ²)` from the seeded stream.
pub fn simulate_tvfi(spec: &DgpSpec, m: Truncation) -> Result<Vec<f64>> {
    let path = dt_path(spec)?;
    let total = spec.n + spec.burn_in;
    let mut rng = stream_rng(spec.seed, 0);
    let mut y = Vec::with_capacity(total);
    for t in 0..total {
        let d = path[t.saturating_sub(spec.burn_in)];
        let eps: f64 = spec.sigma * rng.sample::<f64, _>(StandardNormal);
        let sums = weighted_sums(d, y.iter().rev().copied(), m.limit(t));
        y.push(eps - sums.pi_dot);
    }
    Ok(y.split_off(spec.burn_in))
}

/// Single-column CSV with header `y`.
pub fn write_series_csv<W: Write>(y: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["y"])?;
    for v in y {
        w.write_record([v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
