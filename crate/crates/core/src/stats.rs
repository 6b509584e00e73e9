//! Small sample-statistics helpers used by the estimators, the model and the
//! Monte Carlo harness.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Arithmetic mean; `NaN` for an empty slice.
pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance; `NaN` for fewer than two points.
pub fn variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return f64::NAN;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

/// Unbiased sample standard deviation.
pub fn std_dev(x: &[f64]) -> f64 {
    variance(x).sqrt()
}

/// Median; `NaN` for an empty slice.
pub fn median(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    let mut v = x.to_vec();
    let mid = v.len() / 2;
    let (lo, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    if x.len() % 2 == 1 {
        *m
    } else {
        let below = lo.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (below + *m)
    }
}

/// Median absolute deviation scaled to estimate a normal standard deviation.
pub fn mad_sd(x: &[f64]) -> f64 {
    let c = median(x);
    let dev: Vec<f64> = x.iter().map(|v| (v - c).abs()).collect();
    1.482_602_218_505_602 * median(&dev)
}

/// Standard error of the mean of an autocorrelated series from `n_batches`
/// non-overlapping batch means.
pub fn batch_means_se(x: &[f64], n_batches: usize) -> f64 {
    let size = x.len() / n_batches.max(1);
    if size == 0 || n_batches < 2 {
        return f64::NAN;
    }
    let means: Vec<f64> = x.chunks_exact(size).take(n_batches).map(mean).collect();
    (variance(&means) / means.len() as f64).sqrt()
}

/// Standard normal cumulative distribution function.
pub fn normal_cdf(z: f64) -> f64 {
    standard_normal().cdf(z)
}

/// Standard normal quantile function.
pub fn normal_quantile(p: f64) -> f64 {
    standard_normal().inverse_cdf(p)
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal is valid")
}

/// Two-sided p-value of a standard normal statistic.
pub fn two_sided_p(z: f64) -> f64 {
    2.0 * (1.0 - normal_cdf(z.abs()))
}

/// Kolmogorov-Smirnov distance between the empirical distribution of `x` and
/// the standard normal. Non-finite entries are rejected.
pub fn ks_normal(x: &[f64]) -> Result<f64> {
    if x.is_empty() || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("KS statistic needs a non-empty finite sample".into()));
    }
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let d = s
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = normal_cdf(v);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    Ok(d)
}

/// Ordinary least squares of `y` on `x` with intercept; returns
/// `(intercept, slope, residuals)`.
pub fn ols(y: &[f64], x: &[f64]) -> Result<(f64, f64, Vec<f64>)> {
    if y.len() != x.len() || y.len() < 2 {
        return Err(Error::Input("regression needs two equal-length series".into()));
    }
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= f64::EPSILON * x.len() as f64 * mx.abs().max(1.0).powi(2) {
        return Err(Error::Input("regressor has zero variance".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let resid = x.iter().zip(y).map(|(a, b)| b - intercept - slope * a).collect();
    Ok((intercept, slope, resid))
}
