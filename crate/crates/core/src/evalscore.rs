//! Scoring rules and forecast comparison: CRPS, the Diebold-Mariano test
//! with a Bartlett-weighted HAC variance, and cumulative score differences.
//!
//! Lower scores are better throughout.

use crate::error::{invalid_param, Error, Result};
use crate::forecast::{PredictiveDist, PredictiveKind};
use crate::special::{norm_cdf, norm_pdf};

const INV_SQRT_PI: f64 = 0.564_189_583_547_756_3;
const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Closed-form CRPS of `N(mean, sd²)` at `obs`:
/// `sd [z (2Φ(z) - 1) + 2φ(z) - 1/√π]`, `z = (obs - mean) / sd`.
pub fn crps_gaussian(mean: f64, sd: f64, obs: f64) -> Result<f64> {
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(invalid_param("sd", "must be positive and finite"));
    }
    let z = (obs - mean) / sd;
    Ok(sd * (z * (2.0 * norm_cdf(z) - 1.0) + 2.0 * norm_pdf(z) - INV_SQRT_PI))
}

/// CRPS of the empirical law of `draws`: `E|X - obs| - E|X - X'| / 2`,
/// evaluated in `O(k log k)` from the order statistics.
pub fn crps_sample(draws: &[f64], obs: f64) -> Result<f64> {
    if draws.is_empty() {
        return Err(Error::InvalidInput("CRPS needs at least one draw".into()));
    }
    let mut x = draws.to_vec();
    x.sort_unstable_by(f64::total_cmp);
    Ok(crps_sorted(&x, obs))
}

/// As [`crps_sample`] for draws already sorted ascending.
pub fn crps_sorted(sorted: &[f64], obs: f64) -> f64 {
    let k = sorted.len() as f64;
    let mut abs_obs = 0.0;
    let mut spread = 0.0;
    for (i, &v) in sorted.iter().enumerate() {
        abs_obs += (v - obs).abs();
        // Σ_i Σ_j |x_i - x_j| = 2 Σ_i (2i - k - 1) x_(i), 1-based i
        spread += (2.0 * (i + 1) as f64 - k - 1.0) * v;
    }
    let c = abs_obs / k - spread / (k * k);
    c.max(0.0)
}

/// CRPS of any predictive distribution.
pub fn crps(dist: &PredictiveDist, obs: f64) -> Result<f64> {
    match &dist.kind {
        PredictiveKind::Gaussian { mean, sd } => crps_gaussian(*mean, *sd, obs),
        PredictiveKind::Sample { draws } => crps_sample(draws, obs),
    }
}

/// Logarithmic score `-log f(obs)` of a Gaussian prediction. Diagnostic only;
/// model rankings use the CRPS.
pub fn log_score_gaussian(mean: f64, sd: f64, obs: f64) -> Result<f64> {
    if !(sd > 0.0) {
        return Err(invalid_param("sd", "must be positive"));
    }
    let z = (obs - mean) / sd;
    Ok(0.5 * LN_2PI + sd.ln() + 0.5 * z * z)
}

/// Scores of one model at one horizon, ordered by forecast origin.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSeries {
    pub model_label: String,
    pub horizon: usize,
    pub scores: Vec<f64>,
}

impl ScoreSeries {
    pub fn new(model_label: impl Into<String>, horizon: usize, scores: Vec<f64>) -> Self {
        Self {
            model_label: model_label.into(),
            horizon,
            scores,
        }
    }

    pub fn mean(&self) -> f64 {
        self.scores.iter().sum::<f64>() / self.scores.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DMResult {
    pub statistic: f64,
    /// Lower-tail `Φ(statistic)`: small values favour the first model.
    pub p_value: f64,
    pub hac_variance: f64,
    pub truncation_j: usize,
    pub mean_diff: f64,
    /// HAC variance was zero; the statistic is reported as 0.
    pub degenerate: bool,
}

pub const DM_MIN_LEN: usize = 10;

/// Largest `J` with `J⁴ ≤ l`.
pub fn bandwidth(l: usize) -> usize {
    let mut j = (l as f64).powf(0.25).floor() as usize;
    while (j + 1).pow(4) <= l {
        j += 1;
    }
    while j > 0 && j.pow(4) > l {
        j -= 1;
    }
    j
}

/// `γ̂_0 + 2 Σ_{j=1..J} (1 - j/J) γ̂_j` with mean-centred autocovariances
/// over denominator `l`. Returns the variance and `J`.
pub fn hac_variance(diffs: &[f64]) -> (f64, usize) {
    let l = diffs.len();
    let j_max = bandwidth(l);
    let mean = diffs.iter().sum::<f64>() / l as f64;
    let autocov = |lag: usize| -> f64 {
        (lag..l)
            .map(|i| (diffs[i] - mean) * (diffs[i - lag] - mean))
            .sum::<f64>()
            / l as f64
    };
    let mut var = autocov(0);
    for lag in 1..=j_max {
        let w = 1.0 - lag as f64 / j_max as f64;
        if w > 0.0 {
            var += 2.0 * w * autocov(lag);
        }
    }
    (var, j_max)
}

/// Diebold-Mariano statistic `√l (S̄_a - S̄_b) / σ̂_l` on `d_i = S^a_i - S^b_i`.
pub fn dm_test(a: &ScoreSeries, b: &ScoreSeries) -> Result<DMResult> {
    let l = a.scores.len();
    if l != b.scores.len() {
        return Err(Error::LengthMismatch {
            left: l,
            right: b.scores.len(),
        });
    }
    if l < DM_MIN_LEN {
        return Err(Error::SeriesTooShort { n: l, min: DM_MIN_LEN });
    }
    let diffs: Vec<f64> = a.scores.iter().zip(&b.scores).map(|(x, y)| x - y).collect();
    if diffs.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite score".into()));
    }
    let mean_diff = diffs.iter().sum::<f64>() / l as f64;
    let (var, j) = hac_variance(&diffs);
    if !(var > 0.0) {
        return Ok(DMResult {
            statistic: 0.0,
            p_value: 0.5,
            hac_variance: 0.0,
            truncation_j: j,
            mean_diff,
            degenerate: true,
        });
    }
    let statistic = (l as f64).sqrt() * mean_diff / var.sqrt();
    Ok(DMResult {
        statistic,
        p_value: norm_cdf(statistic),
        hac_variance: var,
        truncation_j: j,
        mean_diff,
        degenerate: false,
    })
}

/// `CS_j = Σ_{i≤j} (S^baseline_i - S^challenger_i)`; rising stretches mark
/// periods where the challenger scores better.
pub fn cumulative_score_diff(baseline: &ScoreSeries, challenger: &ScoreSeries) -> Result<Vec<f64>> {
    if baseline.scores.len() != challenger.scores.len() {
        return Err(Error::LengthMismatch {
            left: baseline.scores.len(),
            right: challenger.scores.len(),
        });
    }
    let mut acc = 0.0;
    Ok(baseline
        .scores
        .iter()
        .zip(&challenger.scores)
        .map(|(b, c)| {
            acc += b - c;
            acc
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn crps_double_sum(draws: &[f64], obs: f64) -> f64 {
        let k = draws.len() as f64;
        let a: f64 = draws.iter().map(|x| (x - obs).abs()).sum::<f64>() / k;
        let b: f64 = draws
            .iter()
            .flat_map(|x| draws.iter().map(move |z| (x - z).abs()))
            .sum::<f64>()
            / (k * k);
        a - 0.5 * b
    }

    #[test]
    fn gaussian_examples() {
        let want = (2f64.sqrt() - 1.0) / std::f64::consts::PI.sqrt();
        assert!((crps_gaussian(0.0, 1.0, 0.0).unwrap() - want).abs() < 1e-15);
        assert!((want - 0.23370).abs() < 1e-5);
        // CRPS = |z| - 1/√π + O(e^{-z²/2}) far from the mean
        let far = crps_gaussian(0.0, 1.0, 20.0).unwrap();
        assert!((far - (20.0 - INV_SQRT_PI)).abs() < 1e-12);
        assert!((far / 20.0 - 1.0).abs() < 0.03);
        assert!((crps_gaussian(0.0, 1.0, -100.0).unwrap() / 100.0 - 1.0).abs() < 0.01);
        let c = 3.7;
        assert!((crps_gaussian(0.0, c, 0.0).unwrap() - c * want).abs() < 1e-14);
        assert!(crps_gaussian(0.0, 0.0, 1.0).is_err());
        assert!(crps_gaussian(0.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn sample_examples() {
        assert_eq!(crps_sample(&[2.5], 1.0).unwrap(), 1.5);
        assert_eq!(crps_sample(&[0.7; 9], 0.7).unwrap(), 0.0);
        assert!(crps_sample(&[], 0.0).is_err());
        let mut rng = stream_rng(1, 0);
        let draws: Vec<f64> = (0..20_000).map(|_| rng.sample(StandardNormal)).collect();
        assert!((crps_sample(&draws, 0.0).unwrap() - 0.23370).abs() < 0.005);
    }

    #[test]
    fn sorted_formula_matches_double_sum() {
        let mut rng = stream_rng(2, 0);
        for k in [1usize, 2, 3, 10, 77, 500] {
            let draws: Vec<f64> = (0..k).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
            let obs: f64 = rng.sample(StandardNormal);
            let fast = crps_sample(&draws, obs).unwrap();
            let slow = crps_double_sum(&draws, obs);
            assert!((fast - slow).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn log_score_is_negative_log_density() {
        let v = log_score_gaussian(1.0, 2.0, 2.0).unwrap();
        let dens = norm_pdf(0.5) / 2.0;
        assert!((v + dens.ln()).abs() < 1e-14);
    }

    #[test]
    fn bandwidth_is_integer_fourth_root() {
        assert_eq!(bandwidth(10), 1);
        assert_eq!(bandwidth(15), 1);
        assert_eq!(bandwidth(16), 2);
        assert_eq!(bandwidth(80), 2);
        assert_eq!(bandwidth(81), 3);
        assert_eq!(bandwidth(1024), 5);
        assert_eq!(bandwidth(1296), 6);
    }

    #[test]
    fn hac_matches_hand_computation() {
        // l = 16 -> J = 2: var = γ0 + 2 (1/2) γ1
        let d: Vec<f64> = (0..16).map(|i| ((i * 5 % 7) as f64) - 3.0).collect();
        let m = d.iter().sum::<f64>() / 16.0;
        let g0 = d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 16.0;
        let g1 = (1..16).map(|i| (d[i] - m) * (d[i - 1] - m)).sum::<f64>() / 16.0;
        let (v, j) = hac_variance(&d);
        assert_eq!(j, 2);
        assert!((v - (g0 + g1)).abs() < 1e-12);
    }

    #[test]
    fn identical_series_are_degenerate() {
        let a = ScoreSeries::new("a", 1, vec![0.3; 40]);
        let r = dm_test(&a, &a).unwrap();
        assert!(r.degenerate);
        assert_eq!((r.statistic, r.p_value), (0.0, 0.5));
    }

    #[test]
    fn dm_validation() {
        let a = ScoreSeries::new("a", 1, vec![0.3; 9]);
        assert!(dm_test(&a, &a).is_err());
        let b = ScoreSeries::new("b", 1, vec![0.3; 12]);
        let c = ScoreSeries::new("c", 1, vec![0.3; 11]);
        assert!(matches!(dm_test(&b, &c), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn dm_sign_convention() {
        let mut rng = stream_rng(3, 0);
        let b: Vec<f64> = (0..200).map(|_| 1.0 + rng.random::<f64>()).collect();
        let a: Vec<f64> = b.iter().map(|v| v - 0.1 + 0.05 * rng.random::<f64>()).collect();
        let r = dm_test(&ScoreSeries::new("a", 1, a), &ScoreSeries::new("b", 1, b)).unwrap();
        assert!(r.statistic < -3.0 && r.p_value < 0.01);
    }

    #[test]
    fn dm_size_under_the_null() {
        let mut rng = stream_rng(4, 0);
        let zeros = ScoreSeries::new("b", 1, vec![0.0; 500]);
        let mut rejections = 0;
        for _ in 0..2000 {
            let d: Vec<f64> = (0..500).map(|_| rng.sample(StandardNormal)).collect();
            let r = dm_test(&ScoreSeries::new("a", 1, d), &zeros).unwrap();
            if r.p_value < 0.05 {
                rejections += 1;
            }
        }
        let rate = rejections as f64 / 2000.0;
        assert!((0.03..=0.08).contains(&rate), "{rate}");
    }

    #[test]
    fn cumulative_differences() {
        let c = ScoreSeries::new("c", 1, vec![0.2, 0.5, 0.1, 0.9]);
        assert_eq!(cumulative_score_diff(&c, &c).unwrap(), vec![0.0; 4]);
        let b = ScoreSeries::new("b", 1, c.scores.iter().map(|v| v + 1.0).collect());
        let cs = cumulative_score_diff(&b, &c).unwrap();
        for (j, v) in cs.iter().enumerate() {
            assert!((v - (j + 1) as f64).abs() < 1e-12);
        }
        assert!((cs[3] - 4.0 * (b.mean() - c.mean())).abs() < 1e-12);
        let short = ScoreSeries::new("s", 1, vec![1.0]);
        assert!(cumulative_score_diff(&short, &c).is_err());
    }

    proptest! {
        #[test]
        fn sample_crps_ignores_draw_order(
            mut draws in prop::collection::vec(-10.0f64..10.0, 1..60),
            obs in -10.0f64..10.0,
            rot in 0usize..60,
        ) {
            let before = crps_sample(&draws, obs).unwrap();
            let r = rot % draws.len();
            draws.rotate_left(r);
            draws.reverse();
            prop_assert!((crps_sample(&draws, obs).unwrap() - before).abs() < 1e-12);
            prop_assert!(before >= 0.0);
        }

        #[test]
        fn dm_is_antisymmetric(a in prop::collection::vec(0.0f64..2.0, 10..80), shift in -0.5f64..0.5) {
            let b: Vec<f64> = a.iter().enumerate().map(|(i, v)| v + shift + 0.1 * ((i % 3) as f64)).collect();
            let sa = ScoreSeries::new("a", 1, a);
            let sb = ScoreSeries::new("b", 1, b);
            let ab = dm_test(&sa, &sb).unwrap();
            let ba = dm_test(&sb, &sa).unwrap();
            prop_assert!((ab.statistic + ba.statistic).abs() < 1e-9);
            prop_assert!((ab.p_value + ba.p_value - 1.0).abs() < 1e-9 || ab.degenerate);
        }
    }
}
