//! Non-parametric estimators of daily integrated beta from noisy prices.
//!
//! The robust realized integrated beta (RIB) works block by block:
//!
//! 1. pre-average both log-price series with the weights `g(j/k)`;
//! 2. drop windows whose pre-averaged increment exceeds the day's threshold
//!    (jump robustness);
//! 3. subtract a lag-weighted sum of noise cross terms, which removes the bias
//!    of serially dependent noise, giving a spot covariance per block;
//! 4. form the spot beta `S12 / max(S11, delta)` and subtract the de-biasing
//!    term that offsets the curvature bias of the ratio;
//! 5. average the de-biased spot betas over the day.
//!
//! The module also provides the asymptotic variance of the daily value and two
//! competitors: a block estimator that assumes independent noise
//! ([`chen_day`]) and the whole-day ratio of pre-averaged covariances
//! ([`prvb_day`]).

mod acf;
mod competitors;
mod context;
mod preavg;

pub use acf::acf;
pub use competitors::{chen_day, chen_from_context, prvb_day, prvb_from_context};
pub use context::DayContext;
pub use preavg::{local_means, noise_cross_term, noise_positions, preavg_increment, preavg_series};

use crate::error::{Error, Result};
use crate::types::{
    BlockMode, BlockWeighting, DayEstimate, DayGrid, Diagnostics, NoiseMoments, PreAvgConfig,
    SpotEstimate, Tuning, VarianceForm,
};
use crate::weights::WeightConstants;

/// Spot covariance over the block starting at `l`, with the ratio formed but
/// without noise moments or de-biasing.
pub fn spot_cov(
    day: &DayGrid,
    l: usize,
    cfg: &PreAvgConfig,
    wc: &WeightConstants,
) -> Result<SpotEstimate> {
    let ctx = DayContext::new(day, cfg, wc)?;
    let (sigma_hat, _) = ctx.sigma_hat(l)?;
    Ok(context::spot_from_parts(l, sigma_hat, NoiseMoments::default(), cfg.delta_floor))
}

/// Block noise moments (unfloored) for the block starting at `block_start`.
pub fn noise_moments(
    day: &DayGrid,
    block_start: usize,
    cfg: &PreAvgConfig,
    wc: &WeightConstants,
) -> Result<NoiseMoments> {
    DayContext::new(day, cfg, wc)?.noise_moments(block_start)
}

/// De-biasing term of a spot beta.
///
/// `4 / (psi0^2 C^3 b sqrt(dt)) * (C^2 Phi01 / S11* + Phi11 t11 / S11*^2)
/// * (t11 S12 / S11* - t12)` with `C = k sqrt(dt)`.
pub fn debias_term(spot: &SpotEstimate, tuning: &Tuning, wc: &WeightConstants) -> f64 {
    let c = tuning.c_k;
    let s11 = spot.sigma11_star;
    let s12 = spot.sigma_hat[0][1];
    let th = &spot.theta_hat;
    let lead = 4.0 / (wc.psi0.powi(2) * c.powi(3) * tuning.b as f64 * tuning.dt.sqrt());
    lead * (c * c * wc.phi01 / s11 + wc.phi11 * th.theta11 / (s11 * s11))
        * (th.theta11 * s12 / s11 - th.theta12)
}

/// Per-block asymptotic variance `R^2` of a spot beta.
pub fn spot_variance(spot: &SpotEstimate, tuning: &Tuning, wc: &WeightConstants, form: VarianceForm) -> f64 {
    let c = tuning.c_k;
    let s11 = spot.sigma11_star;
    let s12 = spot.sigma_hat[0][1];
    let s22 = spot.sigma_hat[1][1];
    let NoiseMoments {
        theta11: t11,
        theta12: t12,
        theta22: t22,
    } = spot.theta_hat;
    let signal = wc.phi00 * (s22 / s11 - s12 * s12 / (s11 * s11));
    let mixed = wc.phi01 / (c * c)
        * (t22 / s11 - 2.0 * s12 * t12 / (s11 * s11) + s22 * t11 / (s11 * s11));
    let noise = match form {
        VarianceForm::DeltaMethod => {
            wc.phi11 / c.powi(4)
                * (2.0 * (s12 * t11).powi(2) / s11.powi(4) - 4.0 * s12 * t11 * t12 / s11.powi(3)
                    + (t11 * t22 + t12 * t12) / (s11 * s11))
        }
        VarianceForm::Verbatim => {
            wc.phi11 / c.powi(3)
                * (2.0 * (s12 * t11).powi(2) / s11.powi(4) + t11 * t12 / (s11 * s11)
                    - 4.0 * s12 * t11 * t12 / s11.powi(3)
                    + t11 * t11 / (s11 * s11))
        }
    };
    2.0 * c / wc.psi0.powi(2) * (signal + mixed + noise)
}

/// Weight of each non-overlapping block in the daily average.
pub fn block_weight(tuning: &Tuning, weighting: BlockWeighting) -> f64 {
    match weighting {
        BlockWeighting::Normalized => 1.0 / tuning.n_blocks as f64,
        BlockWeighting::GridSpan => tuning.b as f64 * tuning.dt,
    }
}

/// Asymptotic variance of `m^(1/4) (rib - integrated beta)` from block spots:
/// `sum_i w_i^2 R_i^2 / (b dt)`. Negative values are clamped to zero and
/// reported through the flag.
pub fn asymptotic_variance_from_spots(
    spots: &[SpotEstimate],
    tuning: &Tuning,
    wc: &WeightConstants,
    cfg: &PreAvgConfig,
) -> (f64, bool) {
    let w = block_weight(tuning, cfg.block_weighting);
    let span = tuning.b as f64 * tuning.dt;
    let s: f64 = spots
        .iter()
        .map(|sp| w * w * spot_variance(sp, tuning, wc, cfg.variance_form))
        .sum::<f64>()
        / span;
    if s < 0.0 {
        (0.0, true)
    } else {
        (s, false)
    }
}

/// Daily RIB estimate, its asymptotic variance and the spot estimates used.
pub fn rib_day(day: &DayGrid, cfg: &PreAvgConfig, wc: &WeightConstants) -> Result<DayEstimate> {
    let ctx = DayContext::new(day, cfg, wc)?;
    rib_from_context(&ctx, day.day_index)
}

/// [`rib_day`] on an existing context.
pub fn rib_from_context(ctx: &DayContext<'_>, day_index: usize) -> Result<DayEstimate> {
    let t = ctx.tuning;
    if t.n_blocks == 0 {
        return Err(Error::Input(format!("day {day_index} holds no complete block")));
    }
    let mut diagnostics = Diagnostics {
        truncated_windows: ctx.truncated_windows(),
        total_windows: ctx.n_windows(),
        screened_positions: ctx.screened_positions(),
        ..Default::default()
    };
    let block_spots = ctx
        .block_starts()
        .map(|l| ctx.spot(l, &mut diagnostics))
        .collect::<Result<Vec<_>>>()?;
    let (rib, spots) = match ctx.cfg.block_mode {
        BlockMode::NonOverlapping => {
            let w = block_weight(&t, ctx.cfg.block_weighting);
            let rib = w * block_spots.iter().map(SpotEstimate::debiased_beta).sum::<f64>();
            (rib, block_spots.clone())
        }
        BlockMode::Overlapping => {
            let mut scratch = Diagnostics::default();
            let all = (0..=t.m - t.b)
                .map(|l| ctx.spot(l, &mut scratch))
                .collect::<Result<Vec<_>>>()?;
            let w = match ctx.cfg.block_weighting {
                BlockWeighting::Normalized => 1.0 / all.len() as f64,
                BlockWeighting::GridSpan => t.dt,
            };
            let rib = w * all.iter().map(SpotEstimate::debiased_beta).sum::<f64>();
            (rib, all)
        }
    };
    let (s_hat, clamped) = asymptotic_variance_from_spots(&block_spots, &t, ctx.wc, ctx.cfg);
    diagnostics.clamped_variance = clamped;
    if !rib.is_finite() {
        return Err(Error::Numerical(format!("day {day_index}: RIB is not finite")));
    }
    Ok(DayEstimate {
        day_index,
        rib,
        s_hat,
        spots,
        diagnostics,
    })
}

/// Asymptotic variance of the daily RIB (see [`asymptotic_variance_from_spots`]).
pub fn rib_asymp_var(day: &DayGrid, cfg: &PreAvgConfig, wc: &WeightConstants) -> Result<f64> {
    Ok(rib_day(day, cfg, wc)?.s_hat)
}

#[cfg(test)]
mod tests;
