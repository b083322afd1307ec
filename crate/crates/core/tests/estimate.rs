use rand::Rng;
use rand_distr::StandardNormal;
use tvfi::estimate::{fit_fi, fit_tvfi, FitConfig};
use tvfi::fraccore::weighted_sums;
use tvfi::gasfilter::{self, link_derivative, scaled_score, ScoreInfo, StaticParams};
use tvfi::rng::stream_rng;
use tvfi::simulate::{simulate_tvfi, DgpKind, DgpSpec};
use tvfi::Truncation;

/// Draws from the score-driven model itself.
fn simulate_gas(p: &StaticParams, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, 0);
    let mut y: Vec<f64> = Vec::with_capacity(n);
    let mut g = p.initial_state().unwrap();
    for _ in 0..n {
        let d = p.d_of(g);
        let sums = weighted_sums(d, y.iter().rev().copied(), y.len());
        let eps = p.sigma() * rng.sample::<f64, _>(StandardNormal);
        let info = ScoreInfo {
            grad_d: -eps * sums.nu_dot / p.sigma2,
            fisher_d: sums.nu_dot * sums.nu_dot / p.sigma2,
            resid: eps,
            w: sums.nu_dot,
        };
        let s = scaled_score(&info, link_derivative(g, p.link_a, p.link_b), p.gamma);
        g = p.omega + p.beta * g + p.alpha * s;
        y.push(eps - sums.pi_dot);
    }
    y
}

#[test]
fn recovers_score_driven_dynamics() {
    let truth = StaticParams {
        omega: 0.0,
        beta: 0.97,
        alpha: 0.15,
        sigma2: 1.0,
        d0: 0.2,
        link_a: -0.4,
        link_b: 0.6,
        gamma: 0.5,
    };
    let y = simulate_gas(&truth, 1000, 1);
    let fit = fit_tvfi(&y, &FitConfig { seed: 1, ..FitConfig::default() }).unwrap();
    assert!(fit.loglik >= gasfilter::loglik(&y, &truth, Truncation::Full).unwrap());
    assert!((fit.params.alpha - 0.15).abs() < 0.06, "{:?}", fit.params);
    assert!((fit.params.beta - 0.97).abs() < 0.03, "{:?}", fit.params);
    assert!((fit.params.sigma2 - 1.0).abs() < 0.1);
}

#[test]
fn tvfi_never_loses_to_nested_constant_model() {
    for (seed, n) in [(0, 400), (1, 400), (4, 1000)] {
        let spec = DgpSpec::new(DgpKind::Constant { d: 0.25 }, n, 2.0, 600 + seed);
        let y = simulate_tvfi(&spec, Truncation::Full).unwrap();
        let fi = fit_fi(&y, Truncation::Full).unwrap();
        let fit = fit_tvfi(&y, &FitConfig { seed, ..FitConfig::default() }).unwrap();
        let constant = StaticParams {
            beta: 0.999,
            alpha: 0.0,
            link_a: -0.4,
            ..StaticParams::constant_d(fi.d_hat, fi.sigma2_hat)
        };
        let ll = gasfilter::loglik(&y, &constant, Truncation::Full).unwrap();
        assert!(fit.loglik >= ll, "{} < {ll}", fit.loglik);
    }
}
