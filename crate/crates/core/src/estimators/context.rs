//! Per-day working state shared by the spot, RIB and competitor estimators.
//!
//! A [`DayContext`] pre-averages both price series once, fixes the day's
//! truncation thresholds and evaluates the noise cross-term lag sums, so every
//! spot estimate afterwards is a pair of window sums.

use crate::error::{Error, Result};
use crate::estimators::preavg::{noise_lag_sums, preavg_series};
use crate::stats::{mad_sd, std_dev};
use crate::types::{
    DayGrid, Diagnostics, NoiseMoments, NoiseScaling, NoiseScreening, PreAvgConfig, SpotEstimate,
    ThresholdScale, Tuning, WindowNormalization,
};
use crate::weights::WeightConstants;

/// Index of the pairs `(1,1)`, `(1,2)` and `(2,2)` in per-pair arrays.
pub(crate) const PAIRS: [(usize, usize); 3] = [(0, 0), (0, 1), (1, 1)];

/// Pre-computed series of one day at a fixed tuning.
#[derive(Debug, Clone)]
pub struct DayContext<'a> {
    pub tuning: Tuning,
    pub(crate) cfg: &'a PreAvgConfig,
    pub(crate) wc: &'a WeightConstants,
    pub(crate) y: [&'a [f64]; 2],
    /// Pre-averaged increments of market and asset, `m - k + 1` each.
    pub(crate) pa: [Vec<f64>; 2],
    /// Truncation thresholds of market and asset.
    pub thresholds: [f64; 2],
    /// Whether each pre-averaged window passes the market and asset thresholds.
    keep: Vec<[bool; 2]>,
    /// `sum_d phi_d E^d` per pair and position.
    pub(crate) noise_weighted: [Vec<f64>; 3],
    /// `sum_d E^d` per pair and position.
    noise_plain: [Vec<f64>; 3],
    /// Whether each noise position is free of detected jumps, per pair.
    pub(crate) clean: [Vec<bool>; 3],
}

impl<'a> DayContext<'a> {
    pub fn new(day: &'a DayGrid, cfg: &'a PreAvgConfig, wc: &'a WeightConstants) -> Result<Self> {
        let tuning = cfg.resolve(day.m())?;
        if wc.k != tuning.k || wc.kp != tuning.kp || wc.weight != cfg.weight {
            return Err(Error::Config(format!(
                "weight constants built for (k, k') = ({}, {}) but the day needs ({}, {})",
                wc.k, wc.kp, tuning.k, tuning.kp
            )));
        }
        if day.m() < tuning.b + 6 * tuning.l {
            return Err(Error::Input(format!(
                "day {} has {} points, fewer than b + 6l = {}",
                day.day_index,
                day.m(),
                tuning.b + 6 * tuning.l
            )));
        }
        let pa = [preavg_series(&day.y1, &wc.gbar)?, preavg_series(&day.y2, &wc.gbar)?];
        let kdt = tuning.k as f64 * tuning.dt;
        let threshold = |p: &[f64]| {
            let scaled: Vec<f64> = p.iter().map(|v| v / kdt.sqrt()).collect();
            let scale = match cfg.threshold_scale {
                ThresholdScale::Mad => mad_sd(&scaled),
                ThresholdScale::SampleSd => std_dev(&scaled),
            };
            cfg.trunc_mult * scale * kdt.powf(cfg.varpi1)
        };
        let thresholds = [threshold(&pa[0]), threshold(&pa[1])];
        if thresholds.iter().any(|u| !u.is_finite()) {
            return Err(Error::Numerical(format!(
                "day {}: truncation threshold is not finite",
                day.day_index
            )));
        }
        let keep: Vec<[bool; 2]> = pa[0]
            .iter()
            .zip(&pa[1])
            .map(|(a, b)| [a.abs() <= thresholds[0], b.abs() <= thresholds[1]])
            .collect();
        let (noise_weighted, noise_plain) = noise_lag_sums(&day.y1, &day.y2, tuning.l, &wc.phi_d);
        if noise_plain[0].len() + 6 * tuning.l < day.m() + 1 {
            return Err(Error::Config(format!(
                "lag window k' = {} is too long for local means of width {}",
                tuning.kp, tuning.l
            )));
        }
        let clean = screen_positions(&keep, noise_plain[0].len(), &tuning, cfg.noise_screening);
        Ok(Self {
            tuning,
            cfg,
            wc,
            y: [&day.y1, &day.y2],
            pa,
            thresholds,
            keep,
            noise_weighted,
            noise_plain,
            clean,
        })
    }

    /// Whether the pre-averaged window at `i` enters the product for pair `p`.
    #[inline]
    pub(crate) fn kept(&self, i: usize, p: usize) -> bool {
        let (x, y) = PAIRS[p];
        self.keep[i][x] && self.keep[i][y]
    }

    /// Whether the window at `i` passes both thresholds.
    #[inline]
    pub(crate) fn kept_both(&self, i: usize) -> bool {
        self.keep[i][0] && self.keep[i][1]
    }

    /// Number of pre-averaged windows.
    pub fn n_windows(&self) -> usize {
        self.pa[0].len()
    }

    /// Windows failing at least one threshold over the whole day.
    pub fn truncated_windows(&self) -> usize {
        (0..self.n_windows()).filter(|&i| !self.kept_both(i)).count()
    }

    /// Checks that a block starting at `l` fits inside the day.
    fn check_block(&self, l: usize) -> Result<()> {
        if l + self.tuning.b > self.tuning.m {
            return Err(Error::Window {
                start: l,
                end: l + self.tuning.b,
                len: self.tuning.m,
            });
        }
        Ok(())
    }

    /// Noise positions `l ..= l + b - 6l_m` used for pair `p`, with the count of
    /// positions the block nominally holds. Falls back to every position when
    /// screening leaves none.
    fn noise_block(&self, l: usize, p: usize) -> (Vec<usize>, usize) {
        let t = &self.tuning;
        let range = l..l + t.b - 6 * t.l + 1;
        let n = range.len();
        let used: Vec<usize> = range.clone().filter(|&j| self.clean[p][j]).collect();
        if used.is_empty() {
            (range.collect(), n)
        } else {
            (used, n)
        }
    }

    /// Spot covariance over the block `[l, l + b)`; the flag reports a block in
    /// which every window was truncated (the estimate is then zero).
    pub fn sigma_hat(&self, l: usize) -> Result<([[f64; 2]; 2], bool)> {
        self.check_block(l)?;
        let t = &self.tuning;
        let n_prod = t.b - 2 * t.k;
        if !(l..l + n_prod).any(|i| self.kept_both(i)) {
            return Ok(([[0.0; 2]; 2], true));
        }
        let mut out = [0.0; 3];
        for (p, &(x, y)) in PAIRS.iter().enumerate() {
            let mut prod = 0.0;
            let mut kept = 0usize;
            for i in l..l + n_prod {
                if self.kept(i, p) {
                    prod += self.pa[x][i] * self.pa[y][i];
                    kept += 1;
                }
            }
            let windows = match self.cfg.window_normalization {
                WindowNormalization::Kept => kept,
                WindowNormalization::Nominal => n_prod,
            };
            if windows == 0 {
                continue;
            }
            let (used, n_noise) = self.noise_block(l, p);
            let noise_sum: f64 = used.iter().map(|&j| self.noise_weighted[p][j]).sum();
            let noise_mean = noise_sum / used.len() as f64;
            let correction = match self.cfg.noise_scaling {
                NoiseScaling::Matched => windows as f64 * noise_mean,
                NoiseScaling::Verbatim => n_noise as f64 * noise_mean * windows as f64 / n_prod as f64,
            };
            let norm = 1.0 / (windows as f64 * t.dt * t.k as f64 * self.wc.psi0);
            out[p] = norm * (prod - correction / t.k as f64);
        }
        Ok(([[out[0], out[1]], [out[1], out[2]]], false))
    }

    /// Block noise moments `(b - 6l)^-1 sum_{j=l}^{l+b-6l} sum_d E^d_j`, not
    /// floored. Screened positions are replaced by the average of the others.
    pub fn noise_moments(&self, l: usize) -> Result<NoiseMoments> {
        self.check_block(l)?;
        let t = &self.tuning;
        let avg = |p: usize| {
            let (used, n_noise) = self.noise_block(l, p);
            let sum: f64 = used.iter().map(|&j| self.noise_plain[p][j]).sum();
            sum * (n_noise as f64 / used.len() as f64) / (t.b - 6 * t.l) as f64
        };
        Ok(NoiseMoments {
            theta11: avg(0),
            theta12: avg(1),
            theta22: avg(2),
        })
    }

    /// Noise positions excluded by jump screening over the whole day.
    pub fn screened_positions(&self) -> usize {
        self.clean.iter().map(|c| c.iter().filter(|v| !**v).count()).sum()
    }

    /// Complete spot estimate at `l` with floored noise moments and the
    /// de-biasing term; guard activity is added to `diag`.
    pub fn spot(&self, l: usize, diag: &mut Diagnostics) -> Result<SpotEstimate> {
        let (sigma_hat, empty) = self.sigma_hat(l)?;
        if empty {
            diag.empty_blocks += 1;
        }
        let mut theta_hat = self.noise_moments(l)?;
        diag.floored_noise_moments += theta_hat.floor_diagonal();
        if sigma_hat[0][0] < self.cfg.delta_floor {
            diag.clamped_denominators += 1;
        }
        let mut spot = spot_from_parts(l, sigma_hat, theta_hat, self.cfg.delta_floor);
        spot.debias = super::debias_term(&spot, &self.tuning, self.wc);
        if !spot.beta_hat.is_finite() || !spot.debias.is_finite() {
            return Err(Error::Numerical(format!("non-finite spot beta at position {l}")));
        }
        Ok(spot)
    }

    /// Start positions of the complete non-overlapping blocks.
    pub fn block_starts(&self) -> impl Iterator<Item = usize> {
        let b = self.tuning.b;
        (0..self.tuning.n_blocks).map(move |i| i * b)
    }
}

/// Flags noise positions whose levels may carry a detected jump.
///
/// A jump between the levels `j` and `j + 5 l_m - 1` peaks in the
/// pre-averaging window starting about `k / 2` earlier, so position `j` is
/// screened for an asset when any window in
/// `[j - ceil(k/2), j + 5 l_m - floor(k/2)]` failed that asset's threshold.
fn screen_positions(keep: &[[bool; 2]], n: usize, t: &Tuning, mode: NoiseScreening) -> [Vec<bool>; 3] {
    if mode == NoiseScreening::AllPositions {
        return [vec![true; n], vec![true; n], vec![true; n]];
    }
    let mut prefix = [vec![0usize; keep.len() + 1], vec![0usize; keep.len() + 1]];
    for (i, k) in keep.iter().enumerate() {
        for a in 0..2 {
            prefix[a][i + 1] = prefix[a][i] + usize::from(!k[a]);
        }
    }
    let lo_off = t.k.div_ceil(2);
    let hi_off = t.k / 2;
    let asset_clean = |a: usize| -> Vec<bool> {
        (0..n)
            .map(|j| {
                let lo = j.saturating_sub(lo_off).min(keep.len());
                let hi = (j + 5 * t.l).saturating_sub(hi_off).min(keep.len().saturating_sub(1));
                hi < lo || prefix[a][hi + 1] == prefix[a][lo]
            })
            .collect()
    };
    let c1 = asset_clean(0);
    let c2 = asset_clean(1);
    let c12 = c1.iter().zip(&c2).map(|(a, b)| *a && *b).collect();
    [c1, c12, c2]
}

/// Assembles a spot estimate without the de-biasing term.
pub(crate) fn spot_from_parts(
    l: usize,
    sigma_hat: [[f64; 2]; 2],
    theta_hat: NoiseMoments,
    delta_floor: f64,
) -> SpotEstimate {
    let sigma11_star = sigma_hat[0][0].max(delta_floor);
    SpotEstimate {
        l,
        sigma_hat,
        sigma11_star,
        theta_hat,
        beta_hat: sigma_hat[0][1] / sigma11_star,
        debias: 0.0,
    }
}
