//! Predictive distributions: analytic Gaussian one step ahead, simulated
//! beyond.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, Error, Result};
use crate::fraccore::{pi_coeffs, weighted_sums, Truncation};
use crate::gasfilter::{self, update, ScoreInfo, StaticParams};
use crate::rng::stream_rng;

pub const DEFAULT_N_SIMS: usize = 5000;

#[derive(Debug, Clone, PartialEq)]
pub enum PredictiveKind {
    Gaussian { mean: f64, sd: f64 },
    Sample { draws: Vec<f64> },
}

/// Predictive law of `y_{origin + horizon}` given `y_1..y_origin`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveDist {
    pub horizon: usize,
    pub origin: usize,
    pub kind: PredictiveKind,
}

impl PredictiveDist {
    pub fn mean(&self) -> f64 {
        match &self.kind {
            PredictiveKind::Gaussian { mean, .. } => *mean,
            PredictiveKind::Sample { draws } => draws.iter().sum::<f64>() / draws.len() as f64,
        }
    }

    /// Standard deviation (sample version uses the `n - 1` denominator).
    pub fn sd(&self) -> f64 {
        match &self.kind {
            PredictiveKind::Gaussian { sd, .. } => *sd,
            PredictiveKind::Sample { draws } => {
                let k = draws.len();
                if k < 2 {
                    return 0.0;
                }
                let m = self.mean();
                (draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (k - 1) as f64).sqrt()
            }
        }
    }
}

/// Whether the memory parameter keeps evolving inside simulated paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryScheme {
    /// Each path runs the score recursion on its own simulated observations.
    #[default]
    Evolving,
    /// `d` stays at the one-step-ahead filtered value.
    FrozenAtOrigin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationOptions {
    pub horizon: usize,
    pub n_sims: usize,
    pub seed: u64,
    pub truncation: Truncation,
    pub scheme: TrajectoryScheme,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            horizon: 1,
            n_sims: DEFAULT_N_SIMS,
            seed: 0,
            truncation: Truncation::Full,
            scheme: TrajectoryScheme::Evolving,
        }
    }
}

/// Gaussian law of `y_{n+1}`: mean `-Σ π_j(d_{n+1}) y_{n+1-j}`, sd `σ`.
pub fn predict_one_step(y: &[f64], params: &StaticParams, m: Truncation) -> Result<PredictiveDist> {
    let f = gasfilter::filter(y, params, m)?;
    Ok(predict_one_step_from(y, params, f.next_g(), m))
}

/// One-step law given the filtered state `g_{n+1}`.
pub fn predict_one_step_from(y: &[f64], params: &StaticParams, g_next: f64, m: Truncation) -> PredictiveDist {
    let d = params.d_of(g_next);
    let sums = weighted_sums(d, y.iter().rev().copied(), m.limit(y.len()));
    PredictiveDist {
        horizon: 1,
        origin: y.len(),
        kind: PredictiveKind::Gaussian {
            mean: -sums.pi_dot,
            sd: params.sigma(),
        },
    }
}

/// Simulated marginals of `y_{n+1}, ..., y_{n+h}`.
///
/// Path `i` draws its innovations from substream `i` of `seed`, so results do
/// not depend on thread scheduling.
pub fn predict_multi_step(
    y: &[f64],
    params: &StaticParams,
    opts: &SimulationOptions,
) -> Result<Vec<PredictiveDist>> {
    let f = gasfilter::filter(y, params, opts.truncation)?;
    predict_multi_step_from(y, params, opts, f.next_g())
}

/// As [`predict_multi_step`], starting from the filtered state `g_{n+1}`.
pub fn predict_multi_step_from(
    y: &[f64],
    params: &StaticParams,
    opts: &SimulationOptions,
    g_next: f64,
) -> Result<Vec<PredictiveDist>> {
    if opts.horizon < 1 {
        return Err(invalid_param("horizon", "must be at least 1"));
    }
    if opts.n_sims < 1 {
        return Err(invalid_param("n_sims", "must be at least 1"));
    }
    if !g_next.is_finite() {
        return Err(Error::NonFinite { t: y.len() + 1, quantity: "state" });
    }
    let g0 = g_next;
    let paths = if opts.scheme == TrajectoryScheme::FrozenAtOrigin || params.alpha == 0.0 {
        shared_memory_paths(y, params, opts, g0)?
    } else {
        (0..opts.n_sims)
            .into_par_iter()
            .map(|i| evolving_path(y, params, opts, g0, i as u64))
            .collect::<Result<Vec<_>>>()?
    };
    Ok((0..opts.horizon)
        .map(|k| PredictiveDist {
            horizon: k + 1,
            origin: y.len(),
            kind: PredictiveKind::Sample {
                draws: paths.iter().map(|p| p[k]).collect(),
            },
        })
        .collect())
}

fn evolving_path(
    y: &[f64],
    params: &StaticParams,
    opts: &SimulationOptions,
    g0: f64,
    index: u64,
) -> Result<Vec<f64>> {
    let mut rng = stream_rng(opts.seed, index);
    let sigma = params.sigma();
    let n = y.len();
    let mut tail: Vec<f64> = Vec::with_capacity(opts.horizon);
    let mut g = g0;
    for k in 0..opts.horizon {
        let d = params.d_of(g);
        let lags = opts.truncation.limit(n + k);
        let past = tail.iter().rev().chain(y.iter().rev()).copied();
        let sums = weighted_sums(d, past, lags);
        let eps: f64 = sigma * rng.sample::<f64, _>(StandardNormal);
        let value = eps - sums.pi_dot;
        if !value.is_finite() {
            return Err(Error::NonFinite { t: n + k + 1, quantity: "simulated observation" });
        }
        if k + 1 < opts.horizon {
            let info = ScoreInfo {
                grad_d: -eps * sums.nu_dot / params.sigma2,
                fisher_d: sums.nu_dot * sums.nu_dot / params.sigma2,
                resid: eps,
                w: sums.nu_dot,
            };
            g = update(params, g, &info).1;
        }
        tail.push(value);
    }
    Ok(tail)
}

/// All paths share one deterministic `d` sequence, so each path is the
/// common extrapolation plus a short moving sum of its own innovations.
fn shared_memory_paths(
    y: &[f64],
    params: &StaticParams,
    opts: &SimulationOptions,
    g0: f64,
) -> Result<Vec<Vec<f64>>> {
    let n = y.len();
    let h = opts.horizon;
    let frozen = opts.scheme == TrajectoryScheme::FrozenAtOrigin;
    let mut g = g0;
    let mut coefs: Vec<Vec<f64>> = Vec::with_capacity(h);
    let mut centre: Vec<f64> = Vec::with_capacity(h);
    for k in 0..h {
        let d = params.d_of(g);
        let lags = opts.truncation.limit(n + k);
        let pi = pi_coeffs(d, lags);
        let past = centre.iter().rev().chain(y.iter().rev());
        let c = -pi.iter().zip(past).map(|(p, v)| p * v).sum::<f64>();
        if !c.is_finite() {
            return Err(Error::NonFinite { t: n + k + 1, quantity: "forecast mean" });
        }
        centre.push(c);
        coefs.push(pi);
        if !frozen {
            g = params.omega + params.beta * g;
        }
    }
    let sigma = params.sigma();
    Ok((0..opts.n_sims)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(opts.seed, i as u64);
            let mut u: Vec<f64> = Vec::with_capacity(h);
            for k in 0..h {
                let eps: f64 = sigma * rng.sample::<f64, _>(StandardNormal);
                let ar: f64 = coefs[k].iter().zip(u.iter().rev()).map(|(p, v)| p * v).sum();
                u.push(eps - ar);
            }
            u.iter().zip(&centre).map(|(a, b)| a + b).collect()
        })
        .collect())
}

/// Predictive samples as CSV with columns `horizon, draw`.
pub fn write_draws_csv<W: Write>(dists: &[PredictiveDist], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["horizon", "draw"])?;
    for dist in dists {
        if let PredictiveKind::Sample { draws } = &dist.kind {
            for v in draws {
                w.write_record([dist.horizon.to_string(), v.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per distribution: `origin, horizon, kind, mean, sd`.
pub fn write_summary_csv<W: Write>(dists: &[PredictiveDist], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["origin", "horizon", "kind", "mean", "sd"])?;
    for dist in dists {
        let kind = match dist.kind {
            PredictiveKind::Gaussian { .. } => "gaussian",
            PredictiveKind::Sample { .. } => "sample",
        };
        w.write_record([
            dist.origin.to_string(),
            dist.horizon.to_string(),
            kind.to_string(),
            dist.mean().to_string(),
            dist.sd().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
