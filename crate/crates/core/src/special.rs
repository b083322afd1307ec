//! Special functions used by the closed-form coefficient checks and the
//! Gaussian scoring rules.

use statrs::function::erf::erfc;

pub use statrs::function::gamma::{digamma, ln_gamma};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal distribution function, accurate in both tails.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Trigamma function `Ψ'(x)` for `x > 0`; NaN elsewhere.
///
/// Shifts the argument above 10 with `Ψ'(x) = Ψ'(x+1) + 1/x²` and finishes
/// with the asymptotic Bernoulli series.
pub fn trigamma(x: f64) -> f64 {
    if !(x > 0.0) || !x.is_finite() {
        return f64::NAN;
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // 1/x + 1/(2x^2) + sum B_{2k} / x^{2k+1}
    let series = inv2
        * (1.0 / 6.0
            + inv2
                * (-1.0 / 30.0
                    + inv2 * (1.0 / 42.0 + inv2 * (-1.0 / 30.0 + inv2 * (5.0 / 66.0)))));
    acc + inv + 0.5 * inv2 + inv * series
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trigamma_known_values() {
        let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
        assert!((trigamma(1.0) - pi2_6).abs() < 1e-13);
        assert!((trigamma(0.5) - std::f64::consts::PI.powi(2) / 2.0).abs() < 1e-12);
        assert!((trigamma(2.0) - (pi2_6 - 1.0)).abs() < 1e-13);
        assert!(trigamma(-1.0).is_nan());
    }

    #[test]
    fn trigamma_is_digamma_slope() {
        for &x in &[0.3, 1.7, 4.2, 25.0] {
            let h = 1e-5;
            let fd = (digamma(x + h) - digamma(x - h)) / (2.0 * h);
            assert!((fd - trigamma(x)).abs() < 1e-7 * trigamma(x).max(1.0), "x={x}");
        }
    }

    #[test]
    fn normal_cdf_symmetry_and_tails() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-16);
        let q = norm_cdf(1.959_963_984_540_054);
        assert!((q - 0.975).abs() < 1e-11, "{q:e}");
        assert!(norm_cdf(-40.0) >= 0.0 && norm_cdf(-40.0) < 1e-300);
        for &x in &[0.1, 1.3, 3.7] {
            assert!((norm_cdf(x) + norm_cdf(-x) - 1.0).abs() < 1e-15);
        }
    }
}
