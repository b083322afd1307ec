//! Monte Carlo study of the filtered memory path.

use std::io::Write;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, Error, Result};
use crate::estimate::{fit_tvfi, FitConfig};
use crate::gasfilter::{self, StaticParams};
use crate::rng::derive_seed;
use crate::simulate::{dt_path, simulate_tvfi, DgpKind, DgpSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MCStudySpec {
    pub dgp: DgpKind,
    pub n: usize,
    pub sigma: f64,
    pub reps: usize,
    pub fit_config: FitConfig,
    pub seed: u64,
}

impl Default for MCStudySpec {
    fn default() -> Self {
        Self {
            dgp: DgpKind::LinearTrend,
            n: 1000,
            sigma: 2.0,
            reps: 200,
            fit_config: FitConfig::default(),
            seed: 0,
        }
    }
}

impl MCStudySpec {
    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(invalid_param("reps", "must be at least 1"));
        }
        self.fit_config.validate()?;
        self.dgp_spec(0).validate()
    }

    fn dgp_spec(&self, rep: usize) -> DgpSpec {
        DgpSpec::new(
            self.dgp.clone(),
            self.n,
            self.sigma,
            derive_seed(self.seed, 2 * rep as u64),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepSummary {
    pub rep: usize,
    pub data_seed: u64,
    pub converged: bool,
    pub loglik: Option<f64>,
    pub params: Option<StaticParams>,
    /// Time average of the filtered `d_t`.
    pub mean_d: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MCStudyResult {
    pub true_path: Vec<f64>,
    pub mean_path: Vec<f64>,
    pub band_lo: Vec<f64>,
    pub band_hi: Vec<f64>,
    pub reps: Vec<RepSummary>,
    /// Replications left out of the aggregates.
    pub excluded: usize,
}

impl MCStudyResult {
    /// RMSE of the mean path against the truth over `t ∈ [from, to]` (1-based).
    pub fn rmse(&self, from: usize, to: usize) -> f64 {
        let idx = from.max(1) - 1..to.min(self.true_path.len());
        let k = idx.len() as f64;
        let ss: f64 = idx.map(|i| (self.mean_path[i] - self.true_path[i]).powi(2)).sum();
        (ss / k).sqrt()
    }

    /// Share of `t ∈ [from, to]` at which the truth lies inside the band.
    pub fn coverage(&self, from: usize, to: usize) -> f64 {
        let idx = from.max(1) - 1..to.min(self.true_path.len());
        let k = idx.len() as f64;
        let inside = idx
            .filter(|&i| self.band_lo[i] <= self.true_path[i] && self.true_path[i] <= self.band_hi[i])
            .count();
        inside as f64 / k
    }

    /// Columns `t, true_d, mean_d, lo, hi`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "true_d", "mean_d", "lo", "hi"])?;
        for i in 0..self.true_path.len() {
            w.write_record([
                (i + 1).to_string(),
                self.true_path[i].to_string(),
                self.mean_path[i].to_string(),
                self.band_lo[i].to_string(),
                self.band_hi[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// One row per replication.
    pub fn write_reps_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "rep", "data_seed", "converged", "loglik", "omega", "beta", "alpha", "sigma2", "d0",
            "mean_d", "error",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.reps {
            let p = r.params;
            w.write_record([
                r.rep.to_string(),
                r.data_seed.to_string(),
                r.converged.to_string(),
                opt(r.loglik),
                opt(p.map(|p| p.omega)),
                opt(p.map(|p| p.beta)),
                opt(p.map(|p| p.alpha)),
                opt(p.map(|p| p.sigma2)),
                opt(p.map(|p| p.d0)),
                opt(r.mean_d),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Type-7 sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn run_rep(spec: &MCStudySpec, rep: usize) -> (RepSummary, Option<Vec<f64>>) {
    let dgp = spec.dgp_spec(rep);
    let mut summary = RepSummary {
        rep,
        data_seed: dgp.seed,
        converged: false,
        loglik: None,
        params: None,
        mean_d: None,
        error: None,
    };
    let cfg = FitConfig {
        seed: derive_seed(spec.seed, 2 * rep as u64 + 1),
        ..spec.fit_config.clone()
    };
    let outcome = simulate_tvfi(&dgp, cfg.truncation).and_then(|y| {
        let fit = fit_tvfi(&y, &cfg)?;
        let f = gasfilter::filter(&y, &fit.params, cfg.truncation)?;
        Ok((fit, f))
    });
    match outcome {
        Ok((fit, f)) => {
            let path = f.d[..spec.n].to_vec();
            summary.converged = fit.converged;
            summary.loglik = Some(fit.loglik);
            summary.params = Some(fit.params);
            summary.mean_d = Some(path.iter().sum::<f64>() / path.len() as f64);
            (summary, fit.converged.then_some(path))
        }
        Err(e) => {
            summary.error = Some(e.to_string());
            (summary, None)
        }
    }
}

/// Simulates, fits and filters `reps` independent series, then aggregates
/// the filtered paths pointwise.
///
/// Replication `r` draws its data from `derive_seed(seed, 2r)` and seeds its
/// optimizer with `derive_seed(seed, 2r + 1)`.
pub fn run_mc_study(spec: &MCStudySpec) -> Result<MCStudyResult> {
    spec.validate()?;
    let true_path = dt_path(&spec.dgp_spec(0))?;
    let outcomes: Vec<(RepSummary, Option<Vec<f64>>)> =
        (0..spec.reps).into_par_iter().map(|r| run_rep(spec, r)).collect();
    let mut reps = Vec::with_capacity(spec.reps);
    let mut paths = Vec::with_capacity(spec.reps);
    for (summary, path) in outcomes {
        match path {
            Some(p) => paths.push(p),
            None => warn!(
                "replication {} excluded: {}",
                summary.rep,
                summary.error.as_deref().unwrap_or("fit did not converge")
            ),
        }
        reps.push(summary);
    }
    if paths.is_empty() {
        return Err(Error::InvalidInput("no replication produced a usable fit".into()));
    }
    let k = paths.len() as f64;
    let n = spec.n;
    let mut mean_path = vec![0.0; n];
    let mut band_lo = vec![0.0; n];
    let mut band_hi = vec![0.0; n];
    let mut column = vec![0.0; paths.len()];
    for t in 0..n {
        for (c, p) in column.iter_mut().zip(&paths) {
            *c = p[t];
        }
        mean_path[t] = column.iter().sum::<f64>() / k;
        column.sort_by(f64::total_cmp);
        band_lo[t] = quantile_sorted(&column, 0.025);
        band_hi[t] = quantile_sorted(&column, 0.975);
    }
    Ok(MCStudyResult {
        true_path,
        mean_path,
        band_lo,
        band_hi,
        excluded: spec.reps - paths.len(),
        reps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type7_quantiles() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&x, 0.0), 1.0);
        assert_eq!(quantile_sorted(&x, 1.0), 4.0);
        assert!((quantile_sorted(&x, 0.5) - 2.5).abs() < 1e-15);
        assert!((quantile_sorted(&x, 0.025) - 1.075).abs() < 1e-12);
        assert_eq!(quantile_sorted(&[7.0], 0.975), 7.0);
    }

    #[test]
    fn rejects_zero_reps() {
        let spec = MCStudySpec { reps: 0, ..MCStudySpec::default() };
        assert!(run_mc_study(&spec).is_err());
    }
}
