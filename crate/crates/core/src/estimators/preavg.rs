//! Pre-averaged increments and noise cross terms.

use crate::error::{check_window, Error, Result};

/// Pre-averaged increment `sum_{j=1}^{k-1} g_j (P_{l+j} - P_{l+j-1})` where
/// `k = gbar.len() - 1`.
pub fn preavg_increment(series: &[f64], l: usize, gbar: &[f64]) -> Result<f64> {
    let k = gbar.len().saturating_sub(1);
    if k < 2 {
        return Err(Error::Config("pre-averaging needs at least three weights".into()));
    }
    check_window(l, l + k, series.len())?;
    Ok(preavg_unchecked(series, l, gbar))
}

#[inline]
fn preavg_unchecked(series: &[f64], l: usize, gbar: &[f64]) -> f64 {
    let k = gbar.len() - 1;
    let w = &series[l..l + k];
    let mut acc = 0.0;
    for j in 1..k {
        acc += gbar[j] * (w[j] - w[j - 1]);
    }
    acc
}

/// Pre-averaged increments at every admissible start `l = 0..=n-k`.
pub fn preavg_series(series: &[f64], gbar: &[f64]) -> Result<Vec<f64>> {
    let k = gbar.len().saturating_sub(1);
    if k < 2 || series.len() < k {
        return Err(Error::Input(format!(
            "series of length {} is shorter than the window {k}",
            series.len()
        )));
    }
    // P~_l = sum_{j<k} c_j P_{l+j} with c_j = g_j - g_{j+1} (end weights dropped).
    let coef: Vec<f64> = (0..k)
        .map(|j| {
            let lo = if j >= 1 { gbar[j] } else { 0.0 };
            let hi = if j + 1 <= k - 1 { gbar[j + 1] } else { 0.0 };
            lo - hi
        })
        .collect();
    if let Some(runs) = constant_runs(&coef, 8) {
        // The coefficients sum to zero, so centering leaves the result unchanged
        // and keeps the prefix sums small.
        let base = series[0];
        let centered: Vec<f64> = series.iter().map(|v| v - base).collect();
        return Ok(run_filter(&centered, &runs));
    }
    Ok((0..=series.len() - k)
        .map(|l| preavg_unchecked(series, l, gbar))
        .collect())
}

/// Splits `coef` into maximal runs of (numerically) equal values as
/// `(start, end, value)`; `None` when there are more than `max_runs`.
pub(crate) fn constant_runs(coef: &[f64], max_runs: usize) -> Option<Vec<(usize, usize, f64)>> {
    let scale = coef.iter().fold(0.0_f64, |a, c| a.max(c.abs()));
    let tol = 1e-12 * scale;
    let mut runs: Vec<(usize, usize, f64)> = Vec::new();
    for (j, &c) in coef.iter().enumerate() {
        match runs.last_mut() {
            Some(r) if (c - r.2).abs() <= tol => r.1 = j + 1,
            _ => {
                if runs.len() == max_runs {
                    return None;
                }
                runs.push((j, j + 1, c));
            }
        }
    }
    Some(runs)
}

/// `out[l] = sum_j coef_j x[l + j]` for a piecewise-constant `coef` given by
/// its runs, via prefix sums.
pub(crate) fn run_filter(x: &[f64], runs: &[(usize, usize, f64)]) -> Vec<f64> {
    let width = runs.last().map_or(0, |r| r.1);
    if x.len() < width {
        return Vec::new();
    }
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in x {
        acc += v;
        prefix.push(acc);
    }
    (0..=x.len() - width)
        .map(|l| {
            runs.iter()
                .filter(|r| r.2 != 0.0)
                .map(|&(s, e, c)| c * (prefix[l + e] - prefix[l + s]))
                .sum()
        })
        .collect()
}

/// Local means `(1/w) sum_{i=0}^{w-1} P_{j+i}` for every admissible `j`.
pub fn local_means(series: &[f64], w: usize) -> Vec<f64> {
    if w == 0 || series.len() < w {
        return Vec::new();
    }
    series.windows(w).map(|s| s.iter().sum::<f64>() / w as f64).collect()
}

/// Noise cross term between `y_a` and `y_b` at position `l` and lag `d`:
/// `(a_l - abar_{l+2w})(b_{l+d} - bbar_{l+4w})` for `d >= 0` and the mirrored
/// `(b_l - bbar_{l+2w})(a_{l+|d|} - abar_{l+4w})` for `d < 0`, where `w = l_m`
/// and bars are local means over `w` points.
pub fn noise_cross_term(y_a: &[f64], y_b: &[f64], l: usize, d: i64, l_m: usize) -> Result<f64> {
    if l_m == 0 {
        return Err(Error::Config("local mean window must be positive".into()));
    }
    let n = y_a.len().min(y_b.len());
    let lag = d.unsigned_abs() as usize;
    check_window(l, (l + 5 * l_m).max(l + lag + 1), n)?;
    let mean = |s: &[f64], j: usize| s[j..j + l_m].iter().sum::<f64>() / l_m as f64;
    let (p, q) = if d >= 0 { (y_a, y_b) } else { (y_b, y_a) };
    Ok((p[l] - mean(p, l + 2 * l_m)) * (q[l + lag] - mean(q, l + 4 * l_m)))
}

/// Number of positions at which every noise cross term with `|d| <= kp` is
/// defined on a day of `m` points.
pub fn noise_positions(m: usize, l_m: usize, kp: usize) -> usize {
    let by_means = (m + 1).saturating_sub(5 * l_m);
    let by_lag = m.saturating_sub(kp);
    by_means.min(by_lag)
}

/// Lag sums of the noise cross terms at every admissible position.
///
/// Returns `(weighted, plain)`, each indexed by pair `[11, 12, 22]`, with
/// `weighted[p][j] = sum_d phi_d E^d_j` and `plain[p][j] = sum_d E^d_j`.
pub(crate) fn noise_lag_sums(
    y1: &[f64],
    y2: &[f64],
    l_m: usize,
    phi: &[f64],
) -> ([Vec<f64>; 3], [Vec<f64>; 3]) {
    let kp = (phi.len() - 1) / 2;
    let m = y1.len();
    let n = noise_positions(m, l_m, kp);
    let mean1 = local_means(y1, l_m);
    let mean2 = local_means(y2, l_m);
    // Levels centered on the local mean two windows ahead.
    let centered = |y: &[f64], mean: &[f64], off: usize, len: usize| -> Vec<f64> {
        (0..len).map(|j| y[j] - mean[j + off]).collect()
    };
    let a2 = centered(y1, &mean1, 2 * l_m, n);
    let b2 = centered(y2, &mean2, 2 * l_m, n);
    let mut weighted: [Vec<f64>; 3] = Default::default();
    let mut plain: [Vec<f64>; 3] = Default::default();
    for v in weighted.iter_mut().chain(plain.iter_mut()) {
        *v = vec![0.0; n];
    }
    for j in 0..n {
        let far = |y: &[f64], mean: &[f64], lag: usize| y[j + lag] - mean[j + 4 * l_m];
        for (di, &w) in phi.iter().enumerate() {
            let d = di as i64 - kp as i64;
            let lag = d.unsigned_abs() as usize;
            // Own-pair terms read the same under the mirror; the cross pair swaps roles.
            let e11 = a2[j] * far(y1, &mean1, lag);
            let e22 = b2[j] * far(y2, &mean2, lag);
            let e12 = if d >= 0 {
                a2[j] * far(y2, &mean2, lag)
            } else {
                b2[j] * far(y1, &mean1, lag)
            };
            for (p, e) in [e11, e12, e22].into_iter().enumerate() {
                weighted[p][j] += w * e;
                plain[p][j] += e;
            }
        }
    }
    (weighted, plain)
}
