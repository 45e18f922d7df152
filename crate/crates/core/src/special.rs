//! Gaussian tail functions and a one-sample Kolmogorov–Smirnov statistic.

use libm::erfc;

/// Standard Gaussian tail `Q(x) = P(Z > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Standard Gaussian CDF.
pub fn normal_cdf(x: f64) -> f64 {
    q_function(-x)
}

/// `sup_x |F_n(x) - Φ(x)|` for the given sample. Sorts `sample` in place.
pub fn ks_statistic_normal(sample: &mut [f64]) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal_cdf(x);
            let lo = i as f64 / n;
            let hi = (i + 1) as f64 / n;
            (f - lo).max(hi - f)
        })
        .fold(0.0, f64::max)
}
