//! Maximum-likelihood estimation for the time-varying model and the
//! constant-`d` FI(d) baseline.
//!
//! The time-varying fit searches an unconstrained space; every free parameter
//! is mapped into its box with a logistic transform (log-logistic for `σ`):
//!
//! | parameter | box |
//! |-----------|-----|
//! | `β` | (-0.999, 0.9999) |
//! | `α` | (-2, 2) |
//! | `ω` | (-2, 2) |
//! | `σ` | (1e-6, 1e3) |
//! | `d_0` | (a + 1e-4, b - 1e-4) |

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, Error, Result};
use crate::fraccore::{pi_coeffs, Truncation};
use crate::gasfilter::{self, link, StaticParams};
use crate::optim::{bfgs_fd, nelder_mead, numerical_hessian, OptimOptions, OptimResult};
use crate::rng::stream_rng;

pub const MIN_FIT_LEN: usize = 50;

const BETA_BOX: (f64, f64) = (-0.999, 0.9999);
const ALPHA_BOX: (f64, f64) = (-2.0, 2.0);
const OMEGA_BOX: (f64, f64) = (-2.0, 2.0);
const LN_SIGMA_BOX: (f64, f64) = (-13.815_510_557_964_274, 6.907_755_278_982_137);
const D0_MARGIN: f64 = 1e-4;

/// Search range for the constant-`d` fit.
pub const FI_D_RANGE: (f64, f64) = (-0.499, 0.599);
const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    DerivativeFreeSimplex,
    QuasiNewtonFiniteDiff,
}

/// Parameters held at fixed values instead of being estimated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixedParams {
    pub omega: Option<f64>,
    pub beta: Option<f64>,
    pub alpha: Option<f64>,
}

impl Default for FixedParams {
    fn default() -> Self {
        Self {
            omega: Some(0.0),
            beta: None,
            alpha: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub fixed: FixedParams,
    pub link_a: f64,
    pub link_b: f64,
    pub gamma: f64,
    pub truncation: Truncation,
    pub optimizer: OptimizerKind,
    pub max_iters: usize,
    pub tol: f64,
    /// Number of starting points; the first is data-driven, the rest are
    /// drawn inside the box from `seed`.
    pub multistart: usize,
    pub seed: u64,
    /// Overrides the data-driven first starting point.
    #[serde(skip)]
    pub start: Option<StaticParams>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            fixed: FixedParams::default(),
            link_a: -0.4,
            link_b: 0.6,
            gamma: 0.5,
            truncation: Truncation::Full,
            optimizer: OptimizerKind::DerivativeFreeSimplex,
            max_iters: 3000,
            tol: 1e-9,
            multistart: 5,
            seed: 0,
            start: None,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.link_a < self.link_b) {
            return Err(invalid_param("link_a", "must be below link_b"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(invalid_param("gamma", "must lie in [0, 1]"));
        }
        if self.multistart == 0 {
            return Err(invalid_param("multistart", "need at least one start"));
        }
        if !(self.tol > 0.0) {
            return Err(invalid_param("tol", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    D0,
    Alpha,
    Beta,
    Sigma,
    Omega,
}

impl Slot {
    fn name(self) -> &'static str {
        match self {
            Slot::D0 => "d0",
            Slot::Alpha => "alpha",
            Slot::Beta => "beta",
            Slot::Sigma => "sigma",
            Slot::Omega => "omega",
        }
    }
}

/// Free-parameter layout and the box transforms.
struct Layout<'a> {
    slots: Vec<Slot>,
    cfg: &'a FitConfig,
}

fn to_box(u: f64, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * link(u, 0.0, 1.0)
}

fn from_box(x: f64, (lo, hi): (f64, f64)) -> f64 {
    let p = ((x - lo) / (hi - lo)).clamp(1e-9, 1.0 - 1e-9);
    (p / (1.0 - p)).ln()
}

impl<'a> Layout<'a> {
    fn new(cfg: &'a FitConfig) -> Self {
        let mut slots = vec![Slot::D0];
        if cfg.fixed.alpha.is_none() {
            slots.push(Slot::Alpha);
        }
        if cfg.fixed.beta.is_none() {
            slots.push(Slot::Beta);
        }
        slots.push(Slot::Sigma);
        if cfg.fixed.omega.is_none() {
            slots.push(Slot::Omega);
        }
        Self { slots, cfg }
    }

    fn d0_box(&self) -> (f64, f64) {
        (self.cfg.link_a + D0_MARGIN, self.cfg.link_b - D0_MARGIN)
    }

    fn base(&self) -> StaticParams {
        StaticParams {
            omega: self.cfg.fixed.omega.unwrap_or(0.0),
            beta: self.cfg.fixed.beta.unwrap_or(0.0),
            alpha: self.cfg.fixed.alpha.unwrap_or(0.0),
            sigma2: 1.0,
            d0: 0.5 * (self.cfg.link_a + self.cfg.link_b),
            link_a: self.cfg.link_a,
            link_b: self.cfg.link_b,
            gamma: self.cfg.gamma,
        }
    }

    /// Natural free values (σ rather than σ²) from full parameters.
    fn natural(&self, p: &StaticParams) -> Vec<f64> {
        self.slots
            .iter()
            .map(|s| match s {
                Slot::D0 => p.d0,
                Slot::Alpha => p.alpha,
                Slot::Beta => p.beta,
                Slot::Sigma => p.sigma(),
                Slot::Omega => p.omega,
            })
            .collect()
    }

    fn from_natural(&self, x: &[f64]) -> StaticParams {
        let mut p = self.base();
        for (s, &v) in self.slots.iter().zip(x) {
            match s {
                Slot::D0 => p.d0 = v,
                Slot::Alpha => p.alpha = v,
                Slot::Beta => p.beta = v,
                Slot::Sigma => p.sigma2 = v * v,
                Slot::Omega => p.omega = v,
            }
        }
        p
    }

    fn decode(&self, u: &[f64]) -> StaticParams {
        let mut p = self.base();
        for (s, &v) in self.slots.iter().zip(u) {
            match s {
                Slot::D0 => p.d0 = to_box(v, self.d0_box()),
                Slot::Alpha => p.alpha = to_box(v, ALPHA_BOX),
                Slot::Beta => p.beta = to_box(v, BETA_BOX),
                Slot::Sigma => p.sigma2 = (2.0 * to_box(v, LN_SIGMA_BOX)).exp(),
                Slot::Omega => p.omega = to_box(v, OMEGA_BOX),
            }
        }
        p
    }

    fn encode(&self, p: &StaticParams) -> Vec<f64> {
        self.slots
            .iter()
            .map(|s| match s {
                Slot::D0 => from_box(p.d0, self.d0_box()),
                Slot::Alpha => from_box(p.alpha, ALPHA_BOX),
                Slot::Beta => from_box(p.beta, BETA_BOX),
                Slot::Sigma => from_box(0.5 * p.sigma2.ln(), LN_SIGMA_BOX),
                Slot::Omega => from_box(p.omega, OMEGA_BOX),
            })
            .collect()
    }
}

/// Outcome of [`fit_tvfi`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: StaticParams,
    pub loglik: f64,
    pub converged: bool,
    pub n_iters: usize,
    pub restarts_used: usize,
    /// Names of the estimated parameters, in the order of `standard_errors`.
    pub free_parameters: Vec<&'static str>,
    /// From the inverse numerical Hessian in natural units (σ, not σ²).
    pub standard_errors: Option<Vec<f64>>,
    /// Best-so-far negative log-likelihood per iteration of the winning start.
    pub trace: Vec<f64>,
}

impl FitResult {
    pub fn report(&self) -> String {
        let p = &self.params;
        let mut s = String::new();
        let _ = writeln!(s, "TV-FI maximum likelihood fit");
        let _ = writeln!(s, "  log-likelihood : {:.6}", self.loglik);
        let _ = writeln!(s, "  converged      : {} ({} iterations, {} starts)", self.converged, self.n_iters, self.restarts_used);
        let _ = writeln!(s, "  link bounds    : ({}, {}), gamma = {}", p.link_a, p.link_b, p.gamma);
        let se = |name: &str| {
            self.free_parameters
                .iter()
                .position(|n| *n == name)
                .and_then(|i| self.standard_errors.as_ref().map(|v| v[i]))
        };
        for (name, value) in [
            ("d0", p.d0),
            ("alpha", p.alpha),
            ("beta", p.beta),
            ("sigma", p.sigma()),
            ("omega", p.omega),
        ] {
            let tag = if self.free_parameters.contains(&name) { "" } else { " (fixed)" };
            match se(name) {
                Some(e) => {
                    let _ = writeln!(s, "  {name:<6} = {value:>12.6}  (se {e:.6}){tag}");
                }
                None => {
                    let _ = writeln!(s, "  {name:<6} = {value:>12.6}{tag}");
                }
            }
        }
        s
    }

    /// `key = value` lines; standard errors use the `se_` prefix.
    pub fn key_values(&self) -> String {
        let p = &self.params;
        let mut s = String::new();
        let _ = writeln!(s, "model = tvfi");
        for (k, v) in [
            ("d0", p.d0),
            ("alpha", p.alpha),
            ("beta", p.beta),
            ("sigma", p.sigma()),
            ("sigma2", p.sigma2),
            ("omega", p.omega),
            ("link_a", p.link_a),
            ("link_b", p.link_b),
            ("gamma", p.gamma),
            ("loglik", self.loglik),
        ] {
            let _ = writeln!(s, "{k} = {v}");
        }
        if let Some(se) = &self.standard_errors {
            for (name, e) in self.free_parameters.iter().zip(se) {
                let _ = writeln!(s, "se_{name} = {e}");
            }
        }
        let _ = writeln!(s, "converged = {}", self.converged);
        let _ = writeln!(s, "n_iters = {}", self.n_iters);
        let _ = writeln!(s, "restarts_used = {}", self.restarts_used);
        s
    }
}

fn check_series(y: &[f64]) -> Result<()> {
    if y.len() < MIN_FIT_LEN {
        return Err(Error::SeriesTooShort {
            n: y.len(),
            min: MIN_FIT_LEN,
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("series contains non-finite values".into()));
    }
    let first = y[0];
    if y.iter().all(|v| *v == first) {
        return Err(Error::DegenerateSeries);
    }
    Ok(())
}

/// Maximizes the filter likelihood over the free static parameters.
///
/// Non-convergence is reported through `converged = false` together with the
/// best point found.
pub fn fit_tvfi(y: &[f64], config: &FitConfig) -> Result<FitResult> {
    check_series(y)?;
    config.validate()?;
    let layout = Layout::new(config);
    let m = config.truncation;

    // The search runs on y / sd(y), snapped to a 2^-32 grid: rescaled inputs
    // then give bit-identical objectives, which matters because the
    // likelihood jumps wherever a score weight changes sign.
    let scale = sample_sd(y);
    let grid = (-32.0_f64).exp2();
    let ys: Vec<f64> = y.iter().map(|v| (v / scale / grid).round() * grid).collect();
    let mut scaled_config = config.clone();
    if let Some(p) = scaled_config.start.as_mut() {
        p.sigma2 /= scale * scale;
    }
    let starts = starting_points(&ys, &scaled_config, &layout)?;
    let objective = |u: &[f64]| -> f64 {
        let p = layout.decode(u);
        match gasfilter::loglik(&ys, &p, m) {
            Ok(ll) if ll.is_finite() => -ll,
            _ => f64::INFINITY,
        }
    };
    let opts = OptimOptions {
        max_iters: config.max_iters,
        tol: config.tol,
        step: 0.5,
    };
    let runs: Vec<OptimResult> = starts
        .par_iter()
        .map(|u0| match config.optimizer {
            OptimizerKind::DerivativeFreeSimplex => nelder_mead(objective, u0, &opts),
            OptimizerKind::QuasiNewtonFiniteDiff => bfgs_fd(objective, u0, &opts),
        })
        .collect();
    let best = runs
        .iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.fx.total_cmp(&b.fx).then(i.cmp(j)))
        .map(|(_, r)| r.clone())
        .expect("at least one start");
    let polished = polish(best, &objective, config.optimizer, &opts);
    if !polished.fx.is_finite() {
        return Err(Error::InvalidInput(
            "likelihood is not finite at any starting point".into(),
        ));
    }

    // Where the filter is very sensitive to the data, the snapped series can
    // rank points differently from y itself; the answer is judged on y.
    let on_y = |r: &OptimResult| -> Option<(StaticParams, f64)> {
        let mut p = layout.decode(&r.x);
        p.sigma2 *= scale * scale;
        match gasfilter::loglik(y, &p, m) {
            Ok(ll) if ll.is_finite() => Some((p, ll)),
            _ => None,
        }
    };
    let mut chosen: Option<(&OptimResult, StaticParams, f64)> = None;
    for r in std::iter::once(&polished).chain(&runs) {
        if let Some((p, ll)) = on_y(r) {
            if chosen.as_ref().is_none_or(|c| ll > c.2) {
                chosen = Some((r, p, ll));
            }
        }
    }
    let Some((best, params, loglik)) = chosen else {
        return Err(Error::InvalidInput(
            "likelihood is not finite at the fitted parameters".into(),
        ));
    };
    let shift = y.len() as f64 * scale.ln();
    let free_parameters: Vec<&'static str> = layout.slots.iter().map(|s| s.name()).collect();
    let standard_errors = hessian_standard_errors(y, &layout, &params, m);
    Ok(FitResult {
        params,
        loglik,
        converged: best.converged,
        n_iters: runs.iter().map(|r| r.iters).sum::<usize>() + polished.iters,
        restarts_used: runs.len(),
        free_parameters,
        standard_errors,
        trace: best.history.iter().map(|f| f + shift).collect(),
    })
}

const POLISH_ROUNDS: usize = 5;

/// Restarts the search from the incumbent until a restart stops improving it,
/// so that refitting from the returned point gives the same optimum.
fn polish<F: Fn(&[f64]) -> f64>(
    mut best: OptimResult,
    objective: &F,
    kind: OptimizerKind,
    opts: &OptimOptions,
) -> OptimResult {
    if !best.fx.is_finite() {
        return best;
    }
    best.iters = 0;
    for _ in 0..POLISH_ROUNDS {
        let next = match kind {
            OptimizerKind::DerivativeFreeSimplex => nelder_mead(objective, &best.x, opts),
            OptimizerKind::QuasiNewtonFiniteDiff => bfgs_fd(objective, &best.x, opts),
        };
        best.iters += next.iters;
        best.evals += next.evals;
        if !(next.fx < best.fx - opts.tol * (1.0 + best.fx.abs())) {
            break;
        }
        best.history.extend(next.history);
        best.x = next.x;
        best.fx = next.fx;
        best.converged = next.converged;
    }
    best
}

fn sample_sd(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn starting_points(y: &[f64], config: &FitConfig, layout: &Layout) -> Result<Vec<Vec<f64>>> {
    let (a, b) = (config.link_a, config.link_b);
    let fixed = config.fixed;
    let mut starts = Vec::with_capacity(config.multistart);
    match config.start {
        Some(p) => starts.push(p),
        None => {
            let fi = fit_fi(y, config.truncation)?;
            let d = fi.d_hat.clamp(a + 0.01, b - 0.01);
            let g = gasfilter::inv_link(d, a, b)?;
            let at = |beta: f64, alpha: f64| {
                let beta = fixed.beta.unwrap_or(beta);
                StaticParams {
                    omega: fixed.omega.unwrap_or((1.0 - beta) * g),
                    beta,
                    alpha: fixed.alpha.unwrap_or(alpha),
                    sigma2: fi.sigma2_hat,
                    d0: d,
                    link_a: a,
                    link_b: b,
                    gamma: config.gamma,
                }
            };
            starts.push(at(0.98, 0.05));
            // the nested constant-d model
            if config.multistart > 1 {
                starts.push(at(0.999, 0.0));
            }
        }
    }
    let sigma_ref = starts[0].sigma();
    let mut rng = stream_rng(config.seed, 0x5eed);
    while starts.len() < config.multistart {
        starts.push(StaticParams {
            omega: fixed.omega.unwrap_or(rng.random_range(-0.2..0.2)),
            beta: fixed.beta.unwrap_or(rng.random_range(0.5..0.999)),
            alpha: fixed.alpha.unwrap_or(rng.random_range(-0.3..0.3)),
            sigma2: (sigma_ref * rng.random_range(0.8..1.25)).powi(2),
            d0: rng.random_range((a + 0.05)..(b - 0.05)),
            link_a: a,
            link_b: b,
            gamma: config.gamma,
        });
    }
    Ok(starts.iter().map(|p| layout.encode(p)).collect())
}

fn hessian_standard_errors(
    y: &[f64],
    layout: &Layout,
    params: &StaticParams,
    m: Truncation,
) -> Option<Vec<f64>> {
    let x = layout.natural(params);
    let f = |v: &[f64]| -> f64 {
        let p = layout.from_natural(v);
        gasfilter::loglik(y, &p, m).unwrap_or(f64::NAN)
    };
    let steps: Vec<f64> = x.iter().map(|v| 1e-4 * v.abs().max(0.1)).collect();
    let h = numerical_hessian(&f, &x, &steps);
    if h.iter().flatten().any(|v| !v.is_finite()) {
        return None;
    }
    let k = x.len();
    let neg = DMatrix::from_fn(k, k, |i, j| -h[i][j]);
    let chol = neg.cholesky()?;
    let inv = chol.inverse();
    (0..k).map(|i| {
        let v = inv[(i, i)];
        (v > 0.0).then(|| v.sqrt())
    }).collect()
}

/// Constant-`d` FI(d) fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiFit {
    pub d_hat: f64,
    pub sigma2_hat: f64,
    /// `d̂ ± 1.96 √(6 / (π² n))`.
    pub ci: (f64, f64),
    pub loglik: f64,
    pub n: usize,
    /// `d̂` ended within 1e-3 of the search range.
    pub at_boundary: bool,
    /// From the curvature of the profile likelihood.
    pub se_hessian: Option<f64>,
}

impl FiFit {
    pub fn as_params(&self) -> StaticParams {
        StaticParams::constant_d(self.d_hat, self.sigma2_hat)
    }

    pub fn asymptotic_se(n: usize) -> f64 {
        (6.0 / (std::f64::consts::PI.powi(2) * n as f64)).sqrt()
    }

    pub fn report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "FI(d) maximum likelihood fit (n = {})", self.n);
        let _ = writeln!(s, "  d      = {:.6}", self.d_hat);
        let _ = writeln!(s, "  95% CI = ({:.6}, {:.6})", self.ci.0, self.ci.1);
        let _ = writeln!(s, "  sigma2 = {:.6}", self.sigma2_hat);
        let _ = writeln!(s, "  loglik = {:.6}", self.loglik);
        if let Some(se) = self.se_hessian {
            let _ = writeln!(s, "  se (profile Hessian) = {se:.6}");
        }
        if self.at_boundary {
            let _ = writeln!(s, "  warning: estimate at the boundary of the search range");
        }
        s
    }

    pub fn key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "model = fi");
        let _ = writeln!(s, "d = {}", self.d_hat);
        let _ = writeln!(s, "sigma2 = {}", self.sigma2_hat);
        let _ = writeln!(s, "ci_lo = {}", self.ci.0);
        let _ = writeln!(s, "ci_hi = {}", self.ci.1);
        let _ = writeln!(s, "loglik = {}", self.loglik);
        if let Some(se) = self.se_hessian {
            let _ = writeln!(s, "se_d = {se}");
        }
        let _ = writeln!(s, "at_boundary = {}", self.at_boundary);
        s
    }
}

/// Truncated-AR residuals `e_t = y_t + Σ_{j≤min(t-1,m)} π_j(d) y_{t-j}`.
pub fn fi_residuals(y: &[f64], d: f64, m: Truncation) -> Vec<f64> {
    let n = y.len();
    let lags = m.limit(n.saturating_sub(1));
    let pi = pi_coeffs(d, lags);
    (0..n)
        .map(|t| {
            let k = lags.min(t);
            let hist = &y[t - k..t];
            y[t] + pi[..k].iter().zip(hist.iter().rev()).map(|(p, v)| p * v).sum::<f64>()
        })
        .collect()
}

/// Profile log-likelihood of FI(d) with `σ²` concentrated out; also returns
/// the residual mean square.
pub fn fi_profile_loglik(y: &[f64], d: f64, m: Truncation) -> (f64, f64) {
    let e = fi_residuals(y, d, m);
    let n = y.len() as f64;
    let s2 = e.iter().map(|v| v * v).sum::<f64>() / n;
    (-0.5 * n * (LN_2PI + s2.ln() + 1.0), s2)
}

/// Maximizes the constant-`d` likelihood over `d ∈ (-0.499, 0.599)`.
pub fn fit_fi(y: &[f64], m: Truncation) -> Result<FiFit> {
    check_series(y)?;
    let (lo, hi) = FI_D_RANGE;
    let prof = |d: f64| fi_profile_loglik(y, d, m).0;

    let grid: Vec<f64> = (0..=54).map(|i| -0.49 + 0.02 * i as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&d| prof(d)).collect();
    let k = vals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty grid");
    let mut left = if k == 0 { lo } else { grid[k - 1] };
    let mut right = if k + 1 == grid.len() { hi } else { grid[k + 1] };

    // golden-section refinement
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = right - r * (right - left);
    let mut x2 = left + r * (right - left);
    let (mut f1, mut f2) = (prof(x1), prof(x2));
    while right - left > 1e-8 {
        if f1 >= f2 {
            right = x2;
            x2 = x1;
            f2 = f1;
            x1 = right - r * (right - left);
            f1 = prof(x1);
        } else {
            left = x1;
            x1 = x2;
            f1 = f2;
            x2 = left + r * (right - left);
            f2 = prof(x2);
        }
    }
    let d_hat = 0.5 * (left + right);
    let (loglik, sigma2_hat) = fi_profile_loglik(y, d_hat, m);
    let n = y.len();
    let half = 1.96 * FiFit::asymptotic_se(n);

    let h = 1e-4;
    let curv = if d_hat - h > lo && d_hat + h < hi {
        (prof(d_hat + h) - 2.0 * loglik + prof(d_hat - h)) / (h * h)
    } else {
        f64::NAN
    };
    Ok(FiFit {
        d_hat,
        sigma2_hat,
        ci: (d_hat - half, d_hat + half),
        loglik,
        n,
        at_boundary: d_hat < lo + 1e-3 || d_hat > hi - 1e-3,
        se_hessian: (curv < 0.0).then(|| (-1.0 / curv).sqrt()),
    })
}
