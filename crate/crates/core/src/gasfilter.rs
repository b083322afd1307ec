//! Score-driven filter for the time-varying memory parameter.
//!
//! The recursion runs on the unconstrained state `g_t`, with
//! `d_t = Λ(g_t) = a + (b - a) / (1 + e^{-g_t})`. At every step the score and
//! the conditional Fisher information with respect to `d_t` are mapped to `g_t`
//! through `Λ'(g_t)`, scaled by `I^{-γ}`, and fed to
//! `g_{t+1} = ω + β g_t + α s_t`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, Error, Result};
use crate::fraccore::{weighted_sums, ArSums, Truncation};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Logistic link `a + (b - a) e^g / (1 + e^g)`; saturates without overflow.
#[inline]
pub fn link(g: f64, a: f64, b: f64) -> f64 {
    a + (b - a) * logistic(g)
}

/// `dΛ/dg = (b - a) p (1 - p)` with `p = e^g / (1 + e^g)`.
#[inline]
pub fn link_derivative(g: f64, a: f64, b: f64) -> f64 {
    let p = logistic(g);
    (b - a) * p * (1.0 - p)
}

/// Inverse of [`link`]; `d` must lie strictly inside `(a, b)`.
pub fn inv_link(d: f64, a: f64, b: f64) -> Result<f64> {
    if !(d > a && d < b) {
        return Err(Error::OutOfLinkRange { d, a, b });
    }
    let p = (d - a) / (b - a);
    Ok((p / (1.0 - p)).ln())
}

#[inline]
fn logistic(g: f64) -> f64 {
    if g >= 0.0 {
        1.0 / (1.0 + (-g).exp())
    } else {
        let e = g.exp();
        e / (1.0 + e)
    }
}

/// Static parameters `θ` of the time-varying model, plus the link bounds and
/// the scaling exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticParams {
    pub omega: f64,
    pub beta: f64,
    pub alpha: f64,
    pub sigma2: f64,
    /// Memory parameter at the first observation; mapped to `g_1`.
    pub d0: f64,
    pub link_a: f64,
    pub link_b: f64,
    pub gamma: f64,
}

impl StaticParams {
    /// Constant-`d` FI(d) model expressed in the same parametrization
    /// (`ω = 0`, `β = 1`, `α = 0`, so `g_t` never moves).
    pub fn constant_d(d: f64, sigma2: f64) -> Self {
        Self {
            omega: 0.0,
            beta: 1.0,
            alpha: 0.0,
            sigma2,
            d0: d,
            link_a: -0.5,
            link_b: 0.6,
            gamma: 0.5,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.omega,
            self.beta,
            self.alpha,
            self.sigma2,
            self.d0,
            self.link_a,
            self.link_b,
            self.gamma,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite parameter in {self:?}")));
        }
        if self.sigma2 <= 0.0 {
            return Err(invalid_param("sigma2", "must be positive"));
        }
        if self.link_a >= self.link_b {
            return Err(invalid_param("link_a", "must be below link_b"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(invalid_param("gamma", "must lie in [0, 1]"));
        }
        if !(self.d0 > self.link_a && self.d0 < self.link_b) {
            return Err(Error::OutOfLinkRange {
                d: self.d0,
                a: self.link_a,
                b: self.link_b,
            });
        }
        Ok(())
    }

    /// `g_1 = Λ^{-1}(d_0)`.
    pub fn initial_state(&self) -> Result<f64> {
        inv_link(self.d0, self.link_a, self.link_b)
    }

    pub fn d_of(&self, g: f64) -> f64 {
        link(g, self.link_a, self.link_b)
    }
}

/// Score and conditional Fisher information of `l_t` with respect to `d_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreInfo {
    pub grad_d: f64,
    pub fisher_d: f64,
    /// Prediction error `e_t = y_t + Σ π_j(d_t) y_{t-j}`.
    pub resid: f64,
    /// `w_t = Σ ν_j(d_t) y_{t-j}`.
    pub w: f64,
}

impl ScoreInfo {
    #[inline]
    fn from_sums(y_t: f64, sums: ArSums, sigma2: f64) -> Self {
        let resid = y_t + sums.pi_dot;
        let w = sums.nu_dot;
        Self {
            grad_d: -resid * w / sigma2,
            fisher_d: w * w / sigma2,
            resid,
            w,
        }
    }
}

/// Score and Fisher information at time `t`.
///
/// `y_past` is `y_1..y_{t-1}` in time order; only the most recent lags allowed
/// by `m` are used.
pub fn score_and_scale(y_past: &[f64], y_t: f64, d_t: f64, sigma2: f64, m: Truncation) -> ScoreInfo {
    let lags = m.limit(y_past.len());
    let sums = weighted_sums(d_t, y_past.iter().rev().copied(), lags);
    ScoreInfo::from_sums(y_t, sums, sigma2)
}

/// `I^{-γ} ∇` in the `g` parametrization; zero when the information vanishes.
#[inline]
pub fn scaled_score(info: &ScoreInfo, lambda_prime: f64, gamma: f64) -> f64 {
    let grad_g = info.grad_d * lambda_prime;
    let info_g = info.fisher_d * lambda_prime * lambda_prime;
    if info_g > 0.0 {
        if gamma == 0.5 {
            grad_g / info_g.sqrt()
        } else {
            grad_g * info_g.powf(-gamma)
        }
    } else {
        0.0
    }
}

/// Per-step paths of one filter pass. `g` and `d` carry `n + 1` entries,
/// the last being the one-step-ahead state.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    pub g: Vec<f64>,
    pub d: Vec<f64>,
    pub s: Vec<f64>,
    pub resid: Vec<f64>,
    pub loglik_t: Vec<f64>,
    pub loglik: f64,
}

impl FilterOutput {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// One-step-ahead memory parameter `d_{n+1}`.
    pub fn next_d(&self) -> f64 {
        *self.d.last().expect("filter output always holds d_{n+1}")
    }

    pub fn next_g(&self) -> f64 {
        *self.g.last().expect("filter output always holds g_{n+1}")
    }

    /// CSV with columns `t, g, d, s, resid, loglik_t` for `t = 1..n`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "g", "d", "s", "resid", "loglik_t"])?;
        for t in 0..self.len() {
            w.write_record([
                (t + 1).to_string(),
                self.g[t].to_string(),
                self.d[t].to_string(),
                self.s[t].to_string(),
                self.resid[t].to_string(),
                self.loglik_t[t].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One filter update: given `g_t` and the sums at `d_t = Λ(g_t)`, returns
/// `(s_t, g_{t+1})`.
#[inline]
pub(crate) fn update(params: &StaticParams, g: f64, info: &ScoreInfo) -> (f64, f64) {
    let lp = link_derivative(g, params.link_a, params.link_b);
    let s = scaled_score(info, lp, params.gamma);
    (s, params.omega + params.beta * g + params.alpha * s)
}

/// Runs the filter over `y`.
pub fn filter(y: &[f64], params: &StaticParams, m: Truncation) -> Result<FilterOutput> {
    if y.len() < 2 {
        return Err(Error::SeriesTooShort { n: y.len(), min: 2 });
    }
    params.validate()?;
    let n = y.len();
    let sigma2 = params.sigma2;
    let const_term = -0.5 * (LN_2PI + sigma2.ln());

    let mut out = FilterOutput {
        g: Vec::with_capacity(n + 1),
        d: Vec::with_capacity(n + 1),
        s: Vec::with_capacity(n),
        resid: Vec::with_capacity(n),
        loglik_t: Vec::with_capacity(n),
        loglik: 0.0,
    };
    let mut g = params.initial_state()?;
    for t in 0..n {
        let d = params.d_of(g);
        let past = &y[..t];
        let sums = weighted_sums(d, past.iter().rev().copied(), m.limit(t));
        let info = ScoreInfo::from_sums(y[t], sums, sigma2);
        if !info.resid.is_finite() || !info.w.is_finite() {
            return Err(Error::NonFinite { t: t + 1, quantity: "prediction error" });
        }
        let (s, g_next) = update(params, g, &info);
        if !s.is_finite() {
            return Err(Error::NonFinite { t: t + 1, quantity: "scaled score" });
        }
        if !g_next.is_finite() {
            return Err(Error::NonFinite { t: t + 1, quantity: "state g" });
        }
        let l = const_term - info.resid * info.resid / (2.0 * sigma2);
        out.g.push(g);
        out.d.push(d);
        out.s.push(s);
        out.resid.push(info.resid);
        out.loglik_t.push(l);
        out.loglik += l;
        g = g_next;
    }
    out.d.push(params.d_of(g));
    out.g.push(g);
    Ok(out)
}

/// Total log-likelihood; same value as `filter(..).loglik`.
pub fn loglik(y: &[f64], params: &StaticParams, m: Truncation) -> Result<f64> {
    filter(y, params, m).map(|f| f.loglik)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fraccore::d2pi_coeffs;
    use crate::rng::stream_rng;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn mc_params() -> StaticParams {
        StaticParams {
            omega: 0.0,
            beta: 0.98,
            alpha: 0.05,
            sigma2: 4.0,
            d0: 0.2,
            link_a: -0.4,
            link_b: 0.6,
            gamma: 0.5,
        }
    }

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, 0);
        (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
    }

    #[test]
    fn link_examples() {
        assert!((link(0.0, -0.4, 0.6) - 0.1).abs() < 1e-15);
        assert_eq!(link(50.0, -0.4, 0.6), 0.6);
        assert_eq!(link(-800.0, -0.4, 0.6), -0.4);
        let e = std::f64::consts::E;
        assert!((link(1.0, -0.4, 0.6) - (-0.4 + e / (1.0 + e))).abs() < 1e-15);
        assert!((link(1.0, -0.4, 0.6) - 0.331_058_578_630_004_9).abs() < 1e-12);
    }

    #[test]
    fn inv_link_examples() {
        assert!(inv_link(0.1, -0.4, 0.6).unwrap().abs() < 1e-15);
        let d = link(1.0, -0.4, 0.6);
        assert!((inv_link(d, -0.4, 0.6).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(inv_link(0.6, -0.4, 0.6), Err(Error::OutOfLinkRange { .. })));
        assert!(inv_link(-0.4, -0.4, 0.6).is_err());
    }

    #[test]
    fn link_derivative_matches_finite_difference() {
        for &g in &[-3.0, -0.2, 0.0, 1.5, 7.0] {
            let fd = (link(g + 1e-6, -0.4, 0.6) - link(g - 1e-6, -0.4, 0.6)) / 2e-6;
            assert!((fd - link_derivative(g, -0.4, 0.6)).abs() < 1e-9);
        }
    }

    #[test]
    fn score_examples() {
        let s = score_and_scale(&[], 1.3, 0.2, 1.0, Truncation::Full);
        assert_eq!((s.grad_d, s.fisher_d), (0.0, 0.0));

        let s = score_and_scale(&[1.0], 0.5, 0.2, 1.0, Truncation::Full);
        assert!((s.resid - 0.3).abs() < 1e-15);
        assert_eq!(s.w, -1.0);
        assert!((s.grad_d - 0.3).abs() < 1e-15);
        assert_eq!(s.fisher_d, 1.0);

        let lt = |d: f64| {
            let e = 0.5 - d * 1.0;
            -0.5 * e * e
        };
        let fd = (lt(0.2 + 1e-6) - lt(0.2 - 1e-6)) / 2e-6;
        assert!((fd - s.grad_d).abs() < 1e-9);
    }

    #[test]
    fn fisher_identity_with_gradient() {
        let y = noise(40, 3);
        for t in 1..40 {
            let s = score_and_scale(&y[..t], y[t], 0.17, 2.5, Truncation::Full);
            assert!(s.fisher_d >= 0.0);
            if s.resid != 0.0 {
                let alt = 2.5 * s.grad_d * s.grad_d / (s.resid * s.resid);
                assert!((alt - s.fisher_d).abs() <= 1e-10 * s.fisher_d.max(1.0));
            }
        }
    }

    #[test]
    fn gradient_matches_finite_difference_of_contribution() {
        let y = noise(120, 11);
        let sigma2 = 1.7;
        let lt = |t: usize, d: f64| {
            let s = score_and_scale(&y[..t], y[t], d, sigma2, Truncation::Full);
            -0.5 * s.resid * s.resid / sigma2
        };
        let mut rng = stream_rng(99, 1);
        for _ in 0..50 {
            let t = rng.random_range(1..120);
            let d = rng.random_range(-0.45..0.45);
            let h = 1e-5;
            let fd = (lt(t, d + h) - lt(t, d - h)) / (2.0 * h);
            let g = score_and_scale(&y[..t], y[t], d, sigma2, Truncation::Full).grad_d;
            let rel = (g - fd).abs() / g.abs().max(1e-3);
            assert!(rel < 1e-6, "t={t} d={d} g={g} fd={fd}");
        }
    }

    #[test]
    fn fisher_is_expected_negative_hessian() {
        let past = noise(60, 5);
        let sigma2 = 2.0;
        let d = 0.23;
        let pi_dot = weighted_sums(d, past.iter().rev().copied(), past.len()).pi_dot;
        let d2_dot: f64 = d2pi_coeffs(d, past.len())
            .iter()
            .zip(past.iter().rev())
            .map(|(c, y)| c * y)
            .sum();
        let info = score_and_scale(&past, 0.0, d, sigma2, Truncation::Full);
        let mut rng = stream_rng(8, 2);
        let n = 10_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| {
                let eps = sigma2.sqrt() * rng.sample::<f64, _>(StandardNormal);
                let y_t = eps - pi_dot;
                let e = y_t + pi_dot;
                (info.w * info.w + e * d2_dot) / sigma2
            })
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - info.fisher_d).abs() < 3.0 * se, "{mean} {} {se}", info.fisher_d);
    }

    #[test]
    fn frozen_recursion_gives_static_likelihood() {
        let y = noise(200, 21);
        let d = 0.3;
        let (a, b) = (-0.4, 0.6);
        let p = StaticParams {
            omega: inv_link(d, a, b).unwrap(),
            beta: 0.0,
            alpha: 0.0,
            sigma2: 1.3,
            d0: d,
            link_a: a,
            link_b: b,
            gamma: 0.5,
        };
        let f = filter(&y, &p, Truncation::Full).unwrap();
        assert!(f.d.iter().all(|x| (x - d).abs() < 1e-14));
        let pi = crate::fraccore::pi_coeffs(d, y.len());
        let mut ll = 0.0;
        for t in 0..y.len() {
            let e = y[t] + (1..=t).map(|j| pi[j - 1] * y[t - j]).sum::<f64>();
            ll += -0.5 * (LN_2PI + 1.3_f64.ln()) - e * e / 2.6;
        }
        assert!((f.loglik - ll).abs() < 1e-9 * ll.abs());
    }

    #[test]
    fn half_scaling_reduces_to_signed_residual() {
        let y = noise(150, 4);
        let p = mc_params();
        let f = filter(&y, &p, Truncation::Full).unwrap();
        let sigma = p.sigma();
        assert_eq!(f.s[0], 0.0);
        for t in 1..y.len() {
            let info = score_and_scale(&y[..t], y[t], f.d[t], p.sigma2, Truncation::Full);
            let want = -info.w.signum() * info.resid / sigma;
            assert!((f.s[t] - want).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn recursion_and_likelihood_identities() {
        let y = noise(100, 6);
        let p = mc_params();
        let f = filter(&y, &p, Truncation::Full).unwrap();
        assert_eq!(f.g.len(), 101);
        assert_eq!(f.d.len(), 101);
        for t in 0..100 {
            assert_eq!(f.g[t + 1], p.omega + p.beta * f.g[t] + p.alpha * f.s[t]);
        }
        assert!((f.loglik - f.loglik_t.iter().sum::<f64>()).abs() < 1e-9);
        assert_eq!(loglik(&y, &p, Truncation::Full).unwrap(), f.loglik);
    }

    #[test]
    fn white_noise_likelihood() {
        let y = noise(80, 12);
        let p = StaticParams {
            omega: 0.0,
            beta: 0.0,
            alpha: 0.0,
            sigma2: 0.8,
            d0: 0.0,
            link_a: -0.5,
            link_b: 0.5,
            gamma: 0.5,
        };
        let ll = loglik(&y, &p, Truncation::Full).unwrap();
        let want = -(80.0 / 2.0) * (2.0 * std::f64::consts::PI * 0.8).ln()
            - y.iter().map(|v| v * v).sum::<f64>() / 1.6;
        assert!((ll - want).abs() < 1e-10);
    }

    #[test]
    fn unused_truncation_capacity_is_irrelevant() {
        let y = noise(60, 13);
        let p = mc_params();
        let a = loglik(&y, &p, Truncation::Fixed(59)).unwrap();
        let b = loglik(&y, &p, Truncation::Fixed(600)).unwrap();
        let c = loglik(&y, &p, Truncation::Full).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn likelihood_peaks_near_sample_variance() {
        let y: Vec<f64> = noise(300, 14).iter().map(|v| 2.0 * v).collect();
        let at = |s2: f64| loglik(&y, &StaticParams { sigma2: s2, ..mc_params() }, Truncation::Full).unwrap();
        let centre = at(4.0);
        assert!(at(0.5) < centre);
        assert!(at(40.0) < centre);
    }

    #[test]
    fn scaling_exponent_extremes_run() {
        let y = noise(100, 15);
        for gamma in [0.0, 1.0] {
            let p = StaticParams { gamma, alpha: 0.01, ..mc_params() };
            let f = filter(&y, &p, Truncation::Full).unwrap();
            assert!(f.d.iter().all(|d| *d > -0.4 && *d < 0.6));
        }
        // gamma = 0: raw score in g-space
        let p = StaticParams { gamma: 0.0, ..mc_params() };
        let f = filter(&y, &p, Truncation::Full).unwrap();
        let info = score_and_scale(&y[..10], y[10], f.d[10], p.sigma2, Truncation::Full);
        let lp = link_derivative(f.g[10], p.link_a, p.link_b);
        assert!((f.s[10] - info.grad_d * lp).abs() < 1e-14);
    }

    #[test]
    fn rejects_short_series_and_bad_params() {
        assert!(matches!(filter(&[1.0], &mc_params(), Truncation::Full), Err(Error::SeriesTooShort { .. })));
        let bad = StaticParams { sigma2: 0.0, ..mc_params() };
        assert!(filter(&[1.0, 2.0], &bad, Truncation::Full).is_err());
        let bad = StaticParams { d0: 0.7, ..mc_params() };
        assert!(filter(&[1.0, 2.0], &bad, Truncation::Full).is_err());
    }

    #[test]
    fn non_finite_data_reports_time_index() {
        let mut y = noise(20, 16);
        y[7] = f64::NAN;
        match filter(&y, &mc_params(), Truncation::Full) {
            Err(Error::NonFinite { t, .. }) => assert_eq!(t, 8),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_export_has_expected_columns() {
        let y = noise(5, 17);
        let f = filter(&y, &mc_params(), Truncation::Full).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,g,d,s,resid,loglik_t"));
        assert_eq!(lines.count(), 5);
    }

    proptest! {
        #[test]
        fn d_stays_inside_link_range(
            omega in -2.0f64..2.0, beta in -0.999f64..0.9999, alpha in -2.0f64..2.0,
            d0 in -0.39f64..0.59, seed in 0u64..1000,
        ) {
            let y: Vec<f64> = noise(60, seed).iter().map(|v| 3.0 * v).collect();
            let p = StaticParams { omega, beta, alpha, d0, ..mc_params() };
            let f = filter(&y, &p, Truncation::Full).unwrap();
            prop_assert!(f.d.iter().all(|d| *d >= -0.4 && *d <= 0.6));
        }
    }
}
