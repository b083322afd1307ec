//! Expanding-window density-forecast evaluation.

use std::fmt::Write as _;
use std::io::Write;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, Error, Result};
use crate::estimate::{fit_fi, fit_tvfi, FitConfig};
use crate::evalscore::{self, DMResult, ScoreSeries, DM_MIN_LEN};
use crate::forecast::{predict_multi_step_from, predict_one_step_from, SimulationOptions, TrajectoryScheme};
use crate::gasfilter::{self, StaticParams};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Tvfi,
    Fi,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Tvfi => "tvfi",
            ModelKind::Fi => "fi",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RollingSpec {
    pub initial_window: usize,
    pub refit_every: usize,
    pub horizons: Vec<usize>,
    pub n_sims: usize,
    pub challenger: ModelKind,
    pub baseline: ModelKind,
    pub scheme: TrajectoryScheme,
    pub fit_config: FitConfig,
    pub seed: u64,
}

impl Default for RollingSpec {
    fn default() -> Self {
        Self {
            initial_window: 1000,
            refit_every: 200,
            horizons: vec![1, 2, 3, 6, 9, 12],
            n_sims: 1000,
            challenger: ModelKind::Tvfi,
            baseline: ModelKind::Fi,
            scheme: TrajectoryScheme::Evolving,
            fit_config: FitConfig::default(),
            seed: 0,
        }
    }
}

impl RollingSpec {
    pub fn validate(&self) -> Result<()> {
        if self.refit_every == 0 {
            return Err(invalid_param("refit_every", "must be at least 1"));
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(invalid_param("horizons", "need at least one horizon, all positive"));
        }
        if self.n_sims == 0 {
            return Err(invalid_param("n_sims", "must be at least 1"));
        }
        self.fit_config.validate()
    }

    fn max_horizon(&self) -> usize {
        self.horizons.iter().copied().max().unwrap_or(1)
    }

    fn sorted_horizons(&self) -> Vec<usize> {
        let mut h = self.horizons.clone();
        h.sort_unstable();
        h.dedup();
        h
    }
}

/// Parameters in force from `origin` until the next refit.
#[derive(Debug, Clone, PartialEq)]
pub struct RefitRecord {
    pub origin: usize,
    pub model: ModelKind,
    pub params: StaticParams,
    pub converged: bool,
    /// The refit failed and the previous parameters were kept.
    pub reused_previous: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonSummary {
    pub horizon: usize,
    pub challenger_crps: f64,
    pub baseline_crps: f64,
    /// `None` when too few origins for the test.
    pub dm: Option<DMResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub challenger: ModelKind,
    pub baseline: ModelKind,
    /// Forecast origins: number of observations available at issue time.
    pub origins: Vec<usize>,
    /// Per horizon, challenger scores indexed like `origins`.
    pub challenger_scores: Vec<ScoreSeries>,
    pub baseline_scores: Vec<ScoreSeries>,
    pub summary: Vec<HorizonSummary>,
    /// Cumulative baseline-minus-challenger one-step CRPS (empty without `h = 1`).
    pub cs: Vec<f64>,
    pub fits: Vec<RefitRecord>,
}

impl EvalReport {
    /// Columns `origin, horizon, model, crps`.
    pub fn write_scores_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["origin", "horizon", "model", "crps"])?;
        for set in [&self.challenger_scores, &self.baseline_scores] {
            for s in set {
                for (o, v) in self.origins.iter().zip(&s.scores) {
                    w.write_record([o.to_string(), s.horizon.to_string(), s.model_label.clone(), v.to_string()])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Average CRPS per horizon with the DM statistic and one-sided p-value.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "horizon".to_string(),
            format!("crps_{}", self.challenger.label()),
            format!("crps_{}", self.baseline.label()),
            "dm_stat".to_string(),
            "p_value".to_string(),
            "degenerate".to_string(),
        ])?;
        for s in &self.summary {
            let (stat, p, deg) = match &s.dm {
                Some(dm) => (dm.statistic.to_string(), dm.p_value.to_string(), dm.degenerate.to_string()),
                None => (String::new(), String::new(), String::new()),
            };
            w.write_record([
                s.horizon.to_string(),
                s.challenger_crps.to_string(),
                s.baseline_crps.to_string(),
                stat,
                p,
                deg,
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Columns `origin, cs`.
    pub fn write_cs_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["origin", "cs"])?;
        for (o, v) in self.origins.iter().zip(&self.cs) {
            w.write_record([o.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Columns `origin, model, converged, reused_previous, omega, beta, alpha, sigma2, d0`.
    pub fn write_fits_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["origin", "model", "converged", "reused_previous", "omega", "beta", "alpha", "sigma2", "d0"])?;
        for f in &self.fits {
            let p = f.params;
            w.write_record([
                f.origin.to_string(),
                f.model.label().to_string(),
                f.converged.to_string(),
                f.reused_previous.to_string(),
                p.omega.to_string(),
                p.beta.to_string(),
                p.alpha.to_string(),
                p.sigma2.to_string(),
                p.d0.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Plain-text table.
    pub fn table(&self) -> String {
        let (c, b) = (self.challenger.label(), self.baseline.label());
        let mut s = String::new();
        let _ = writeln!(s, "origins: {} ({}..={})", self.origins.len(), self.origins[0], self.origins[self.origins.len() - 1]);
        let _ = writeln!(s, "{:>3}  {:>12}  {:>12}  {:>9}  {:>8}", "h", format!("crps {c}"), format!("crps {b}"), "DM", "p");
        for h in &self.summary {
            let (stat, p) = match &h.dm {
                Some(dm) => (format!("{:.3}", dm.statistic), format!("{:.4}", dm.p_value)),
                None => ("-".into(), "-".into()),
            };
            let _ = writeln!(s, "{:>3}  {:>12.6}  {:>12.6}  {:>9}  {:>8}", h.horizon, h.challenger_crps, h.baseline_crps, stat, p);
        }
        s
    }
}

fn fit_model(
    y: &[f64],
    model: ModelKind,
    cfg: &FitConfig,
    previous: Option<&RefitRecord>,
    origin: usize,
) -> Result<RefitRecord> {
    let attempt = match model {
        ModelKind::Tvfi => {
            let cfg = FitConfig {
                start: previous.map(|p| p.params).or(cfg.start),
                seed: derive_seed(cfg.seed, origin as u64),
                ..cfg.clone()
            };
            fit_tvfi(y, &cfg).map(|f| (f.params, f.converged))
        }
        ModelKind::Fi => fit_fi(y, cfg.truncation).map(|f| (f.as_params(), true)),
    };
    match (attempt, previous) {
        (Ok((params, converged)), None) => {
            if !converged {
                warn!("{} fit at origin {origin} did not converge; using the best point found", model.label());
            }
            Ok(RefitRecord { origin, model, params, converged, reused_previous: false })
        }
        (Ok((params, true)), Some(_)) => Ok(RefitRecord { origin, model, params, converged: true, reused_previous: false }),
        (Ok((_, false)), Some(prev)) => {
            warn!("{} refit at origin {origin} did not converge; keeping previous parameters", model.label());
            Ok(RefitRecord { origin, model, params: prev.params, converged: false, reused_previous: true })
        }
        (Err(e), Some(prev)) => {
            warn!("{} refit at origin {origin} failed ({e}); keeping previous parameters", model.label());
            Ok(RefitRecord { origin, model, params: prev.params, converged: false, reused_previous: true })
        }
        (Err(e), None) => Err(e),
    }
}

/// CRPS of every horizon's forecast issued at each origin in `origins`,
/// all sharing one parameter vector.
fn score_block(
    y: &[f64],
    params: &StaticParams,
    origins: &[usize],
    horizons: &[usize],
    spec: &RollingSpec,
    stream: u64,
) -> Result<Vec<Vec<f64>>> {
    let m = spec.fit_config.truncation;
    // causal recursion: g[t] only uses y[..t]
    let f = gasfilter::filter(y, params, m)?;
    let h_max = *horizons.last().expect("non-empty horizons");
    origins
        .par_iter()
        .map(|&t| {
            let past = &y[..t];
            let mut out = Vec::with_capacity(horizons.len());
            let sims = if h_max > 1 {
                let opts = SimulationOptions {
                    horizon: h_max,
                    n_sims: spec.n_sims,
                    seed: derive_seed(derive_seed(spec.seed, stream), t as u64),
                    truncation: m,
                    scheme: spec.scheme,
                };
                Some(predict_multi_step_from(past, params, &opts, f.g[t])?)
            } else {
                None
            };
            for &h in horizons {
                let obs = y[t + h - 1];
                let score = if h == 1 {
                    evalscore::crps(&predict_one_step_from(past, params, f.g[t], m), obs)?
                } else {
                    evalscore::crps(&sims.as_ref().expect("simulated paths")[h - 1], obs)?
                };
                out.push(score);
            }
            Ok(out)
        })
        .collect()
}

/// Walks forecast origins `initial_window..=n - h_max`, refitting both models
/// every `refit_every` origins on all data seen so far, and scores each
/// horizon with CRPS (closed form at `h = 1`, sample estimator beyond).
pub fn run_rolling_eval(y: &[f64], spec: &RollingSpec) -> Result<EvalReport> {
    spec.validate()?;
    let horizons = spec.sorted_horizons();
    let h_max = spec.max_horizon();
    let n = y.len();
    if spec.initial_window < crate::estimate::MIN_FIT_LEN || n < spec.initial_window + h_max {
        return Err(Error::SeriesTooShort { n, min: spec.initial_window.max(crate::estimate::MIN_FIT_LEN) + h_max });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("series contains non-finite values".into()));
    }
    let origins: Vec<usize> = (spec.initial_window..=n - h_max).collect();
    let models = [spec.challenger, spec.baseline];
    let mut fits: Vec<RefitRecord> = Vec::new();
    let mut last: [Option<RefitRecord>; 2] = [None, None];
    let mut scores: [Vec<Vec<f64>>; 2] = [Vec::new(), Vec::new()];
    for block in origins.chunks(spec.refit_every) {
        let t0 = block[0];
        for (k, &model) in models.iter().enumerate() {
            let record = fit_model(&y[..t0], model, &spec.fit_config, last[k].as_ref(), t0)?;
            let block_scores = score_block(y, &record.params, block, &horizons, spec, k as u64)?;
            scores[k].extend(block_scores);
            last[k] = Some(record.clone());
            fits.push(record);
        }
    }
    let series = |k: usize| -> Vec<ScoreSeries> {
        let label = if models[0] == models[1] { format!("{}_{}", models[k].label(), ["a", "b"][k]) } else { models[k].label().to_string() };
        horizons
            .iter()
            .enumerate()
            .map(|(j, &h)| ScoreSeries::new(label.clone(), h, scores[k].iter().map(|row| row[j]).collect()))
            .collect()
    };
    let challenger_scores = series(0);
    let baseline_scores = series(1);
    let mut summary = Vec::with_capacity(horizons.len());
    for (c, b) in challenger_scores.iter().zip(&baseline_scores) {
        let dm = if c.scores.len() >= DM_MIN_LEN {
            Some(evalscore::dm_test(c, b)?)
        } else {
            warn!("h = {}: {} origins are too few for the DM test", c.horizon, c.scores.len());
            None
        };
        summary.push(HorizonSummary { horizon: c.horizon, challenger_crps: c.mean(), baseline_crps: b.mean(), dm });
    }
    let cs = match horizons.iter().position(|&h| h == 1) {
        Some(j) => evalscore::cumulative_score_diff(&baseline_scores[j], &challenger_scores[j])?,
        None => Vec::new(),
    };
    Ok(EvalReport {
        challenger: spec.challenger,
        baseline: spec.baseline,
        origins,
        challenger_scores,
        baseline_scores,
        summary,
        cs,
        fits,
    })
}
