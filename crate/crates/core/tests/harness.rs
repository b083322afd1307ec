use tvfi::estimate::{FitConfig, FixedParams};
use tvfi::harness::{centered_absolute_returns, run_mc_study, run_rolling_eval, MCStudySpec, ModelKind, RollingSpec};
use tvfi::simulate::{simulate_tvfi, DgpKind, DgpSpec};
use tvfi::Truncation;

fn series(n: usize, seed: u64) -> Vec<f64> {
    simulate_tvfi(&DgpSpec::new(DgpKind::LinearTrend, n, 1.0, seed), Truncation::Full).unwrap()
}

fn small_spec() -> RollingSpec {
    RollingSpec {
        initial_window: 150,
        refit_every: 40,
        horizons: vec![1, 3],
        n_sims: 300,
        fit_config: FitConfig { multistart: 2, ..FitConfig::default() },
        seed: 3,
        ..RollingSpec::default()
    }
}

#[test]
fn future_outlier_leaves_earlier_forecasts_alone() {
    let y = series(280, 1);
    let mut z = y.clone();
    let k = 215;
    z[k] += 40.0;
    let spec = small_spec();
    let a = run_rolling_eval(&y, &spec).unwrap();
    let b = run_rolling_eval(&z, &spec).unwrap();
    assert_eq!(a.origins, b.origins);
    let h_max = 3;
    let mut compared = 0;
    for (sa, sb) in a.challenger_scores.iter().chain(&a.baseline_scores).zip(b.challenger_scores.iter().chain(&b.baseline_scores)) {
        for (i, &t) in a.origins.iter().enumerate() {
            // origin t has seen y[..t]; targets reach y[t + h - 1]
            if t + h_max <= k {
                assert_eq!(sa.scores[i], sb.scores[i], "h={} origin={t}", sa.horizon);
                compared += 1;
            }
        }
    }
    assert!(compared > 100);
    let changed = a.challenger_scores[0].scores.iter().zip(&b.challenger_scores[0].scores).any(|(x, y)| x != y);
    assert!(changed);
}

#[test]
fn refit_schedule() {
    let y = series(400, 2);
    let spec = RollingSpec {
        initial_window: 200,
        refit_every: 30,
        horizons: vec![1, 3],
        n_sims: 50,
        challenger: ModelKind::Fi,
        baseline: ModelKind::Fi,
        ..RollingSpec::default()
    };
    let rep = run_rolling_eval(&y, &spec).unwrap();
    let n_origins = rep.origins.len();
    assert_eq!(n_origins, 400 - 3 - 200 + 1);
    assert_eq!(rep.origins[0], 200);
    let expected = 1 + (n_origins - 1) / 30;
    assert_eq!(rep.fits.len(), 2 * expected);
    let origins: Vec<usize> = rep.fits.iter().step_by(2).map(|f| f.origin).collect();
    assert_eq!(origins, (0..expected).map(|i| 200 + 30 * i).collect::<Vec<_>>());
}

#[test]
fn identical_models_are_degenerate() {
    let y = series(260, 3);
    let spec = RollingSpec {
        initial_window: 200,
        refit_every: 20,
        horizons: vec![1],
        challenger: ModelKind::Fi,
        baseline: ModelKind::Fi,
        ..RollingSpec::default()
    };
    let rep = run_rolling_eval(&y, &spec).unwrap();
    let dm = rep.summary[0].dm.as_ref().unwrap();
    assert!(dm.degenerate);
    assert_eq!(rep.cs.len(), rep.origins.len());
    assert!(rep.cs.iter().all(|v| *v == 0.0));
}

#[test]
fn constant_tvfi_tracks_fi() {
    let y = simulate_tvfi(&DgpSpec::new(DgpKind::Constant { d: 0.2 }, 300, 1.0, 4), Truncation::Full).unwrap();
    let spec = RollingSpec {
        initial_window: 220,
        refit_every: 40,
        horizons: vec![1],
        fit_config: FitConfig {
            fixed: FixedParams { omega: Some(0.0), beta: Some(1.0), alpha: Some(0.0) },
            multistart: 2,
            ..FitConfig::default()
        },
        ..RollingSpec::default()
    };
    let rep = run_rolling_eval(&y, &spec).unwrap();
    let avg = rep.summary[0].baseline_crps;
    let last = *rep.cs.last().unwrap();
    assert!(last.abs() < 1e-3 * avg * rep.origins.len() as f64, "{last}");
}

#[test]
fn rolling_rejects_short_series() {
    let y = series(120, 5);
    assert!(run_rolling_eval(&y, &RollingSpec { initial_window: 115, ..RollingSpec::default() }).is_err());
}

#[test]
fn single_replication_band_is_the_path() {
    let spec = MCStudySpec {
        dgp: DgpKind::LogisticRegime,
        n: 150,
        reps: 1,
        fit_config: FitConfig { multistart: 2, ..FitConfig::default() },
        seed: 9,
        ..MCStudySpec::default()
    };
    let res = run_mc_study(&spec).unwrap();
    assert_eq!(res.excluded, 0);
    assert_eq!(res.band_lo, res.mean_path);
    assert_eq!(res.band_hi, res.mean_path);
    assert_eq!(res.true_path.len(), 150);
}

#[test]
fn mc_band_brackets_mean() {
    let spec = MCStudySpec {
        dgp: DgpKind::Constant { d: 0.2 },
        n: 120,
        reps: 6,
        fit_config: FitConfig { multistart: 1, ..FitConfig::default() },
        seed: 10,
        ..MCStudySpec::default()
    };
    let a = run_mc_study(&spec).unwrap();
    assert!(a.band_lo.iter().zip(&a.mean_path).zip(&a.band_hi).all(|((l, m), h)| l <= m && m <= h));
    assert_eq!(a.reps.len(), 6);
    assert_eq!(run_mc_study(&spec).unwrap(), a);
}

#[test]
fn returns_from_prices() {
    let e = std::f64::consts::E;
    assert_eq!(centered_absolute_returns(&[1.0, e, 1.0]).unwrap(), vec![1.0, 1.0]);
    let p = [1.0, 1.1, 1.05, 1.2, 1.19];
    let r = centered_absolute_returns(&p).unwrap();
    let x: Vec<f64> = p.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    let m = x.iter().sum::<f64>() / 4.0;
    assert!(x.iter().map(|v| v - m).sum::<f64>().abs() < 1e-15);
    assert_eq!(r.len(), 4);
}
