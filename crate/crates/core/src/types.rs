//! Shared data model: tick series, regular day grids, pre-averaging tuning and
//! the containers returned by the estimators.
//!
//! Time is measured in trading days. A day sampled at `m` regular points has
//! grid spacing `dt = 1/m`, and every count the estimators use (`k`, `b`, `l`,
//! `k'`) is resolved from `dt` by [`PreAvgConfig::resolve`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weights::WeightFunction;

/// One observed trade or quote.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tick {
    /// Seconds since the Unix epoch (fractional seconds allowed).
    pub timestamp: f64,
    pub log_price: f64,
}

/// Irregularly spaced log prices of a single asset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickSeries {
    asset_id: String,
    ticks: Vec<Tick>,
}

impl TickSeries {
    /// Validates strict time ordering and finiteness.
    pub fn new(asset_id: impl Into<String>, ticks: Vec<Tick>) -> Result<Self> {
        for (i, t) in ticks.iter().enumerate() {
            if !t.timestamp.is_finite() || !t.log_price.is_finite() {
                return Err(Error::Input(format!("tick {i} is not finite")));
            }
            if i > 0 && t.timestamp <= ticks[i - 1].timestamp {
                return Err(Error::Input(format!(
                    "timestamps must be strictly increasing (tick {i} at {})",
                    t.timestamp
                )));
            }
        }
        Ok(Self {
            asset_id: asset_id.into(),
            ticks,
        })
    }

    pub fn asset_id(&self) -> &str {
        &self.asset_id
    }

    pub fn ticks(&self) -> &[Tick] {
        &self.ticks
    }

    pub fn len(&self) -> usize {
        self.ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }
}

/// Paired noisy log prices of the market (`y1`) and the asset (`y2`) on a
/// regular grid of one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayGrid {
    /// One-based day number.
    pub day_index: usize,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
}

impl DayGrid {
    pub fn new(day_index: usize, y1: Vec<f64>, y2: Vec<f64>) -> Result<Self> {
        if day_index == 0 {
            return Err(Error::Input("day_index is one-based".into()));
        }
        if y1.len() != y2.len() {
            return Err(Error::Input(format!(
                "day {day_index}: market has {} points, asset has {}",
                y1.len(),
                y2.len()
            )));
        }
        if y1.is_empty() {
            return Err(Error::Input(format!("day {day_index} is empty")));
        }
        if y1.iter().chain(&y2).any(|v| !v.is_finite()) {
            return Err(Error::Input(format!("day {day_index} has non-finite prices")));
        }
        Ok(Self { day_index, y1, y2 })
    }

    /// Number of grid points.
    pub fn m(&self) -> usize {
        self.y1.len()
    }

    /// Grid spacing in day units.
    pub fn dt(&self) -> f64 {
        1.0 / self.m() as f64
    }

    /// Keeps every `factor`-th point, ending each stride on its last point.
    pub fn subsample(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.m() % factor != 0 {
            return Err(Error::Input(format!(
                "subsampling factor {factor} does not divide m = {}",
                self.m()
            )));
        }
        let pick = |v: &[f64]| v.iter().skip(factor - 1).step_by(factor).copied().collect();
        Ok(Self {
            day_index: self.day_index,
            y1: pick(&self.y1),
            y2: pick(&self.y2),
        })
    }
}

/// A sequence of day grids.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DayPanel {
    pub days: Vec<DayGrid>,
}

impl DayPanel {
    pub fn new(days: Vec<DayGrid>) -> Self {
        Self { days }
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    /// Splits off the days too short for the tuning resolved at their own
    /// `m`; returns `(kept, rejected day indices)`.
    pub fn validated(self, cfg: &PreAvgConfig) -> (Self, Vec<usize>) {
        let mut kept = Vec::with_capacity(self.days.len());
        let mut rejected = Vec::new();
        for day in self.days {
            match cfg.resolve(day.m()) {
                Ok(t) if day.m() >= t.b + 6 * t.l => kept.push(day),
                _ => rejected.push(day.day_index),
            }
        }
        (Self { days: kept }, rejected)
    }
}

/// How spot estimates are combined into a daily value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockMode {
    /// One de-biased spot beta per disjoint block of `b` points.
    #[default]
    NonOverlapping,
    /// A de-biased spot beta at every grid position, averaged with weight `1/m`.
    Overlapping,
}

/// Normalization of the noise-correction sum inside the spot covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseScaling {
    /// Subtract the average correction term once per window in the product
    /// sum, so that both parts cover the same number of windows.
    #[default]
    Matched,
    /// Sum `b - 6l + 1` correction terms under the `(b - 2k)` normalization.
    Verbatim,
}

/// Scale estimate behind the truncation thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdScale {
    /// `1.4826 * median |x - median(x)|`, which the jumps themselves cannot
    /// inflate.
    #[default]
    Mad,
    /// Sample standard deviation over the day.
    SampleSd,
}

/// Which positions feed the noise cross-term averages of a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseScreening {
    /// Skip positions whose levels straddle a truncated pre-averaging window,
    /// so that detected jumps do not enter the noise estimates.
    #[default]
    JumpScreened,
    /// Use every position of the block.
    AllPositions,
}

/// Divisor of the block product sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowNormalization {
    /// Number of windows that passed truncation for the pair.
    #[default]
    Kept,
    /// `b - 2k` regardless of truncation.
    Nominal,
}

/// Weights attached to the block spot betas of a day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockWeighting {
    /// Each block gets `1 / n_blocks`, so the weights sum to one.
    #[default]
    Normalized,
    /// Each block gets its length `b * dt`; the dropped trailing partial block
    /// leaves the total slightly below one.
    GridSpan,
}

/// Algebraic form of the per-block asymptotic variance `R^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceForm {
    /// Delta-method variance of the spot beta ratio; non-negative whenever the
    /// spot covariance and noise matrices are positive semidefinite.
    #[default]
    DeltaMethod,
    /// The printed closed form, including its asymmetric noise-noise group.
    Verbatim,
}

/// Tuning of the pre-averaging, truncation and blocking steps.
///
/// Every count is `floor(c * m^exponent)` with a minimum of 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreAvgConfig {
    /// Pre-averaging window `k = floor(c_k * m^(1/2))`.
    pub c_k: f64,
    /// Block length `b = floor(c_b * m^kappa)`.
    pub c_b: f64,
    pub kappa: f64,
    /// Local-mean window `l = floor(c_l * m^varsigma)`.
    pub c_l: f64,
    pub varsigma: f64,
    /// Noise autocovariance lags `k' = floor(c_kp * m^tau)`.
    pub c_kp: f64,
    pub tau: f64,
    /// Truncation exponent: threshold `u = a * (k dt)^varpi1`.
    pub varpi1: f64,
    /// Threshold scale `a = trunc_mult * sd(pre-averaged increment / sqrt(k dt))`.
    pub trunc_mult: f64,
    pub threshold_scale: ThresholdScale,
    /// Floor applied to the market spot variance in every ratio.
    pub delta_floor: f64,
    pub weight: WeightFunction,
    pub block_mode: BlockMode,
    pub noise_scaling: NoiseScaling,
    pub noise_screening: NoiseScreening,
    pub window_normalization: WindowNormalization,
    pub block_weighting: BlockWeighting,
    pub variance_form: VarianceForm,
}

impl Default for PreAvgConfig {
    fn default() -> Self {
        Self {
            c_k: 1.0,
            c_b: 1.0,
            kappa: 0.68,
            c_l: 1.0,
            varsigma: 0.2,
            c_kp: 1.0,
            tau: 0.12,
            varpi1: 0.47,
            trunc_mult: 4.0,
            threshold_scale: ThresholdScale::Mad,
            delta_floor: 1e-5,
            weight: WeightFunction::Triangular,
            block_mode: BlockMode::NonOverlapping,
            noise_scaling: NoiseScaling::Matched,
            noise_screening: NoiseScreening::JumpScreened,
            window_normalization: WindowNormalization::Kept,
            block_weighting: BlockWeighting::Normalized,
            variance_form: VarianceForm::DeltaMethod,
        }
    }
}

/// Counts resolved from a [`PreAvgConfig`] at a given number of grid points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tuning {
    pub m: usize,
    pub dt: f64,
    /// Pre-averaging window.
    pub k: usize,
    /// Block length.
    pub b: usize,
    /// Local-mean window of the noise cross terms.
    pub l: usize,
    /// Largest noise autocovariance lag.
    pub kp: usize,
    /// Number of complete blocks, `floor(m / b)`.
    pub n_blocks: usize,
    /// Effective window constant `k * sqrt(dt)`.
    pub c_k: f64,
}

fn resolve_count(c: f64, m: usize, exponent: f64) -> usize {
    // The small offset keeps exact powers such as sqrt(2500) from flooring down.
    let raw = (c * (m as f64).powf(exponent) + 1e-9).floor();
    (raw as usize).max(2)
}

impl PreAvgConfig {
    /// Checks parameter ranges independent of `m`.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("c_k", self.c_k),
            ("c_b", self.c_b),
            ("c_l", self.c_l),
            ("c_kp", self.c_kp),
            ("trunc_mult", self.trunc_mult),
            ("delta_floor", self.delta_floor),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let in_range = [
            ("kappa", self.kappa > 2.0 / 3.0 && self.kappa < 0.75),
            ("varsigma", self.varsigma >= 0.125 && self.varsigma <= 0.2),
            ("tau", self.tau > 0.0 && self.tau <= 0.125),
            ("varpi1", self.varpi1 > 0.0 && self.varpi1 < 0.5),
        ];
        for (name, ok) in in_range {
            if !ok {
                return Err(Error::Config(format!("{name} is outside its admissible range")));
            }
        }
        Ok(())
    }

    /// Resolves the integer tuning at `m` grid points per day.
    pub fn resolve(&self, m: usize) -> Result<Tuning> {
        self.validate()?;
        if m < 4 {
            return Err(Error::Config(format!("m = {m} is too small")));
        }
        let dt = 1.0 / m as f64;
        let k = resolve_count(self.c_k, m, 0.5);
        let b = resolve_count(self.c_b, m, self.kappa);
        let l = resolve_count(self.c_l, m, self.varsigma);
        let kp = resolve_count(self.c_kp, m, self.tau);
        if b <= 2 * k || b <= 6 * l {
            return Err(Error::Config(format!(
                "block length b = {b} must exceed 2k = {} and 6l = {} at m = {m}",
                2 * k,
                6 * l
            )));
        }
        if b > m {
            return Err(Error::Config(format!("block length b = {b} exceeds m = {m}")));
        }
        Ok(Tuning {
            m,
            dt,
            k,
            b,
            l,
            kp,
            n_blocks: m / b,
            c_k: k as f64 * dt.sqrt(),
        })
    }
}

/// Integrated noise autocovariance estimates over one block.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseMoments {
    pub theta11: f64,
    pub theta12: f64,
    pub theta22: f64,
}

impl NoiseMoments {
    /// Floors the two diagonal entries at zero; returns how many were raised.
    pub fn floor_diagonal(&mut self) -> usize {
        let mut n = 0;
        for v in [&mut self.theta11, &mut self.theta22] {
            if *v < 0.0 {
                *v = 0.0;
                n += 1;
            }
        }
        n
    }
}

/// Spot covariance, noise moments and de-biased spot beta at one grid position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpotEstimate {
    /// Grid position of the first observation of the window.
    pub l: usize,
    /// Symmetric spot covariance `[[S11, S12], [S12, S22]]` per day.
    pub sigma_hat: [[f64; 2]; 2],
    /// `max(S11, delta_floor)`.
    pub sigma11_star: f64,
    pub theta_hat: NoiseMoments,
    /// `S12 / sigma11_star`.
    pub beta_hat: f64,
    /// De-biasing term subtracted from `beta_hat`.
    pub debias: f64,
}

impl SpotEstimate {
    pub fn debiased_beta(&self) -> f64 {
        self.beta_hat - self.debias
    }
}

/// Counters describing what the estimator had to guard against on a day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Pre-averaged windows dropped by the market or asset threshold.
    pub truncated_windows: usize,
    /// Pre-averaged windows inspected.
    pub total_windows: usize,
    /// Spots whose market variance was raised to `delta_floor`.
    pub clamped_denominators: usize,
    /// Negative diagonal noise moments raised to zero.
    pub floored_noise_moments: usize,
    /// Blocks whose every window was truncated.
    pub empty_blocks: usize,
    /// Noise positions (summed over the three pairs) skipped by jump screening.
    pub screened_positions: usize,
    /// Set when a negative variance estimate had to be clamped to zero.
    pub clamped_variance: bool,
}

impl Diagnostics {
    pub fn merge(&mut self, other: &Diagnostics) {
        self.truncated_windows += other.truncated_windows;
        self.total_windows += other.total_windows;
        self.clamped_denominators += other.clamped_denominators;
        self.floored_noise_moments += other.floored_noise_moments;
        self.empty_blocks += other.empty_blocks;
        self.screened_positions += other.screened_positions;
        self.clamped_variance |= other.clamped_variance;
    }
}

/// Daily integrated beta estimate with its asymptotic variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayEstimate {
    pub day_index: usize,
    pub rib: f64,
    /// Asymptotic variance of `m^(1/4) * (rib - integrated beta)`.
    pub s_hat: f64,
    pub spots: Vec<SpotEstimate>,
    pub diagnostics: Diagnostics,
}

/// One row of a [`RibSeries`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RibEntry {
    pub day_index: usize,
    pub rib: f64,
    pub s_hat: f64,
    pub n_spots: usize,
}

/// Daily estimates ordered by day.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RibSeries {
    pub days: Vec<RibEntry>,
}

impl RibSeries {
    pub fn values(&self) -> Vec<f64> {
        self.days.iter().map(|d| d.rib).collect()
    }
}
