//! Competitor estimators: a block estimator built for independent noise and
//! the whole-day ratio of pre-averaged covariances.
//!
//! Both share the pre-averaging window, block length and thresholds of the
//! RIB. A window is kept only when both pre-averaged increments pass their
//! thresholds, and the kept outer product enters every matrix entry.

use crate::error::{Error, Result};
use crate::estimators::context::{spot_from_parts, DayContext, PAIRS};
use crate::estimators::preavg::{constant_runs, run_filter};
use crate::estimators::{block_weight, debias_term};
use crate::types::{DayGrid, NoiseMoments, PreAvgConfig};
use crate::weights::WeightConstants;

/// Bias correction `Yhat_j = 1/2 sum_{r=1}^{k} (g_r - g_{r-1})^2 dY_{j+r} dY_{j+r}'`
/// per pair, for every `j` with `j + k <= m - 1`.
fn yhat_series(ctx: &DayContext<'_>) -> [Vec<f64>; 3] {
    let k = ctx.tuning.k;
    let m = ctx.tuning.m;
    let g = &ctx.wc.gbar;
    let dg2: Vec<f64> = (1..=k).map(|r| (g[r] - g[r - 1]).powi(2)).collect();
    let inc = |y: &[f64]| -> Vec<f64> { (1..m).map(|i| y[i] - y[i - 1]).collect() };
    let d = [inc(ctx.y[0]), inc(ctx.y[1])];
    let n = m - k;
    let mut out: [Vec<f64>; 3] = Default::default();
    let half: Vec<f64> = dg2.iter().map(|v| 0.5 * v).collect();
    let runs = constant_runs(&half, 8);
    for (p, &(x, y)) in PAIRS.iter().enumerate() {
        out[p] = match &runs {
            Some(runs) => {
                // dY_{j+r} is stored at index j + r - 1, so windows start at j.
                let prod: Vec<f64> = d[x].iter().zip(&d[y]).map(|(a, b)| a * b).collect();
                let mut v = run_filter(&prod, runs);
                v.truncate(n);
                v
            }
            None => (0..n)
                .map(|j| {
                    // dY_{j+r} is stored at index j + r - 1.
                    0.5 * (1..=k)
                        .map(|r| dg2[r - 1] * d[x][j + r - 1] * d[y][j + r - 1])
                        .sum::<f64>()
                })
                .collect(),
        };
    }
    out
}

/// Block-wise estimator with the `Yhat` noise correction and independent-noise
/// moments, averaged with the same block weights as the RIB.
pub fn chen_day(day: &DayGrid, cfg: &PreAvgConfig, wc: &WeightConstants) -> Result<f64> {
    chen_from_context(&DayContext::new(day, cfg, wc)?)
}

/// [`chen_day`] on an existing context.
pub fn chen_from_context(ctx: &DayContext<'_>) -> Result<f64> {
    let t = ctx.tuning;
    let (k, b, m) = (t.k, t.b, t.m);
    if t.n_blocks == 0 {
        return Err(Error::Input("day holds no complete block".into()));
    }
    let yhat = yhat_series(ctx);
    let norm = 1.0 / ((b - k) as f64 * t.dt * k as f64 * ctx.wc.psi0);
    let mut total = 0.0;
    for i in ctx.block_starts() {
        // Windows running past the last increment of the day are dropped.
        let last = (b - k + 1).min(m - 1 - k - i);
        let mut s = [0.0; 3];
        for l in 0..=last {
            let j = i + l;
            let keep = ctx.kept_both(j);
            for (p, &(x, y)) in PAIRS.iter().enumerate() {
                if keep {
                    s[p] += ctx.pa[x][j] * ctx.pa[y][j];
                }
                s[p] -= yhat[p][j];
            }
        }
        let sigma = [[norm * s[0], norm * s[1]], [norm * s[1], norm * s[2]]];
        let mut th = [0.0; 3];
        for (p, &(x, y)) in PAIRS.iter().enumerate() {
            for r in 1..=k {
                let a = ctx.y[x][i + r] - ctx.y[x][i + r - 1];
                let c = ctx.y[y][i + r] - ctx.y[y][i + r - 1];
                th[p] += a * c;
            }
            th[p] /= 2.0 * k as f64;
        }
        let theta = NoiseMoments {
            theta11: th[0],
            theta12: th[1],
            theta22: th[2],
        };
        let mut spot = spot_from_parts(i, sigma, theta, ctx.cfg.delta_floor);
        spot.debias = debias_term(&spot, &t, ctx.wc);
        total += spot.debiased_beta();
    }
    let est = block_weight(&t, ctx.cfg.block_weighting) * total;
    if est.is_finite() {
        Ok(est)
    } else {
        Err(Error::Numerical("block competitor is not finite".into()))
    }
}

/// Whole-day ratio of truncated, `Yhat`-corrected pre-averaged covariances.
///
/// The market variance is normalized to per-day units and floored at
/// `delta_floor`, so the ratio stays finite on degenerate days.
pub fn prvb_day(day: &DayGrid, cfg: &PreAvgConfig, wc: &WeightConstants) -> Result<f64> {
    prvb_from_context(&DayContext::new(day, cfg, wc)?)
}

/// [`prvb_day`] on an existing context.
pub fn prvb_from_context(ctx: &DayContext<'_>) -> Result<f64> {
    let t = ctx.tuning;
    let (k, m) = (t.k, t.m);
    if m <= k + 1 {
        return Err(Error::Input(format!("day of {m} points is shorter than the window")));
    }
    let yhat = yhat_series(ctx);
    let last = (m - k + 1).min(m - 1 - k);
    let mut s = [0.0; 3];
    for j in 0..=last {
        if ctx.kept_both(j) {
            for (p, &(x, y)) in PAIRS.iter().enumerate() {
                s[p] += ctx.pa[x][j] * ctx.pa[y][j] - yhat[p][j];
            }
        }
    }
    let norm = 1.0 / ((m - k) as f64 * t.dt * k as f64 * ctx.wc.psi0);
    let est = s[1] / (norm * s[0]).max(ctx.cfg.delta_floor) * norm;
    if est.is_finite() {
        Ok(est)
    } else {
        Err(Error::Numerical("whole-day ratio is not finite".into()))
    }
}
