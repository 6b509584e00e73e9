//! Pre-averaging weight functions and the constants derived from them.
//!
//! A weight function `g` lives on `[0, 1]` with `g(0) = g(1) = 0`. The
//! estimators need two kinds of constants:
//!
//! * continuum integrals of the autocorrelation functions
//!   `phi0(s) = int_s^1 g(u) g(u - s) du` and `phi1(s)` (same with `g'`):
//!   `psi0 = phi0(0)`, `psi1 = phi1(0)`, `Phi00 = int_0^1 phi0^2`,
//!   `Phi01 = int_0^1 phi0 phi1` and `Phi11 = int_0^1 phi1^2`;
//! * discrete quantities at a window length `k`: the weights `g(j/k)` and the
//!   lag weights `phi_d = k * sum_i (g_{i+1} - g_i)(g_{i-d+1} - g_{i-d})` for
//!   `|d| <= k'`.
//!
//! Integrals use composite Simpson rules split at every kink of the
//! integrand, so piecewise polynomial weights are integrated essentially
//! exactly. Continuum constants are cached per weight function.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::PreAvgConfig;

/// Outer Simpson panels used for the `Phi` integrals.
pub const DEFAULT_OUTER_PANELS: usize = 1 << 14;
const INNER_PANELS: usize = 64;

/// Supported weight functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightFunction {
    /// `g(x) = min(x, 1 - x)`.
    #[default]
    Triangular,
    /// `g(x) = sin(pi x)`.
    Sine,
}

impl WeightFunction {
    /// Weight at `x`, zero outside `[0, 1]`.
    pub fn g(self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        match self {
            Self::Triangular => x.min(1.0 - x),
            Self::Sine => (std::f64::consts::PI * x).sin(),
        }
    }

    /// Derivative of `g` at `x`, zero outside `(0, 1)`.
    pub fn g_prime(self, x: f64) -> f64 {
        if !(0.0..1.0).contains(&x) {
            return 0.0;
        }
        match self {
            Self::Triangular => {
                if x < 0.5 {
                    1.0
                } else {
                    -1.0
                }
            }
            Self::Sine => std::f64::consts::PI * (std::f64::consts::PI * x).cos(),
        }
    }

    /// Points of `[0, 1]` where `g` or `g'` is not smooth.
    pub fn kinks(self) -> &'static [f64] {
        match self {
            Self::Triangular => &[0.0, 0.5, 1.0],
            Self::Sine => &[0.0, 1.0],
        }
    }
}

/// Composite Simpson rule with `panels` (rounded up to even) sub-intervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let n = (panels.max(2) + 1) & !1;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Simpson rule applied separately on each segment between sorted breakpoints.
///
/// Panels are distributed in proportion to segment length. Nodes are kept a
/// hair inside each segment so that jump discontinuities sitting on a
/// breakpoint are evaluated from the correct side.
fn piecewise_simpson<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], panels: usize) -> f64 {
    let span = breaks[breaks.len() - 1] - breaks[0];
    if span <= 0.0 {
        return 0.0;
    }
    breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let eps = ((b - a) * 0.25).min(1e-12);
            let share = ((b - a) / span * panels as f64).ceil() as usize;
            simpson(|x| f(x.clamp(a + eps, b - eps)), a, b, share)
        })
        .sum()
}

fn sorted_breaks(mut pts: Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
    pts.retain(|p| *p > lo && *p < hi);
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    pts
}

/// `int_s^1 h(u) h(u - s) du` for `h = g` or `h = g'`, split at the kinks of
/// both factors.
fn autocorrelation(weight: WeightFunction, s: f64, derivative: bool) -> f64 {
    let kinks = weight.kinks();
    let mut pts: Vec<f64> = kinks.to_vec();
    pts.extend(kinks.iter().map(|k| k + s));
    let breaks = sorted_breaks(pts, s, 1.0);
    let panels = INNER_PANELS * (breaks.len() - 1);
    if derivative {
        piecewise_simpson(&|u| weight.g_prime(u) * weight.g_prime(u - s), &breaks, panels)
    } else {
        piecewise_simpson(&|u| weight.g(u) * weight.g(u - s), &breaks, panels)
    }
}

/// `phi0(s)`.
pub fn phi0(weight: WeightFunction, s: f64) -> f64 {
    autocorrelation(weight, s, false)
}

/// `phi1(s)`.
pub fn phi1(weight: WeightFunction, s: f64) -> f64 {
    autocorrelation(weight, s, true)
}

/// Continuum constants of a weight function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuumConstants {
    pub psi0: f64,
    pub psi1: f64,
    pub phi00: f64,
    pub phi01: f64,
    pub phi11: f64,
}

/// Computes the continuum constants with `outer_panels` Simpson panels for the
/// `Phi` integrals.
pub fn continuum_constants(weight: WeightFunction, outer_panels: usize) -> ContinuumConstants {
    let kinks = weight.kinks();
    let g2 = |u: f64| weight.g(u).powi(2);
    let psi0 = piecewise_simpson(&g2, &sorted_breaks(kinks.to_vec(), 0.0, 1.0), 4 * INNER_PANELS);
    let psi1 = phi1(weight, 0.0);

    // phi0 and phi1 are smooth in s between pairwise kink differences.
    let diffs: Vec<f64> = kinks
        .iter()
        .flat_map(|a| kinks.iter().map(move |b| a - b))
        .collect();
    let breaks = sorted_breaks(diffs, 0.0, 1.0);
    let mut phi00 = 0.0;
    let mut phi01 = 0.0;
    let mut phi11 = 0.0;
    let span_panels = |w: &[f64]| (((w[1] - w[0]) * outer_panels as f64).ceil() as usize + 1) & !1;
    for w in breaks.windows(2).filter(|w| w[1] > w[0]) {
        let n = span_panels(w).max(2);
        let h = (w[1] - w[0]) / n as f64;
        for i in 0..=n {
            let s = w[0] + i as f64 * h;
            let c = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let a = phi0(weight, s);
            let b = phi1(weight, s);
            let wt = c * h / 3.0;
            phi00 += wt * a * a;
            phi01 += wt * a * b;
            phi11 += wt * b * b;
        }
    }
    ContinuumConstants {
        psi0,
        psi1,
        phi00,
        phi01,
        phi11,
    }
}

/// Cached continuum constants at the default resolution.
pub fn cached_continuum(weight: WeightFunction) -> ContinuumConstants {
    static TRIANGULAR: OnceLock<ContinuumConstants> = OnceLock::new();
    static SINE: OnceLock<ContinuumConstants> = OnceLock::new();
    let cell = match weight {
        WeightFunction::Triangular => &TRIANGULAR,
        WeightFunction::Sine => &SINE,
    };
    *cell.get_or_init(|| continuum_constants(weight, DEFAULT_OUTER_PANELS))
}

/// Largest change in any `Phi` constant between the default resolution and
/// its Richardson extrapolation from a doubled panel count.
pub fn richardson_gap(weight: WeightFunction) -> f64 {
    let coarse = continuum_constants(weight, DEFAULT_OUTER_PANELS);
    let fine = continuum_constants(weight, 2 * DEFAULT_OUTER_PANELS);
    let extrapolate = |c: f64, f: f64| (16.0 * f - c) / 15.0;
    [
        (coarse.phi00, fine.phi00),
        (coarse.phi01, fine.phi01),
        (coarse.phi11, fine.phi11),
    ]
    .iter()
    .map(|&(c, f)| (c - extrapolate(c, f)).abs())
    .fold(0.0, f64::max)
}

/// Continuum constants plus the discrete weights at a window length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightConstants {
    pub weight: WeightFunction,
    /// Pre-averaging window `k`.
    pub k: usize,
    /// Largest lag `k'` of `phi_d`.
    pub kp: usize,
    pub psi0: f64,
    pub psi1: f64,
    pub phi00: f64,
    pub phi01: f64,
    pub phi11: f64,
    /// `phi_d` for `d = -k'..=k'` (index `d + k'`).
    pub phi_d: Vec<f64>,
    /// `g(j/k)` for `j = 0..=k`.
    pub gbar: Vec<f64>,
}

impl WeightConstants {
    /// Builds the constants for explicit `k` and `k'`.
    pub fn new(weight: WeightFunction, k: usize, kp: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::Config(format!("pre-averaging window k = {k} must be at least 2")));
        }
        let c = cached_continuum(weight);
        let gbar: Vec<f64> = (0..=k).map(|j| weight.g(j as f64 / k as f64)).collect();
        let phi_d = (-(kp as i64)..=kp as i64)
            .map(|d| discrete_phi(&gbar, d))
            .collect();
        Ok(Self {
            weight,
            k,
            kp,
            psi0: c.psi0,
            psi1: c.psi1,
            phi00: c.phi00,
            phi01: c.phi01,
            phi11: c.phi11,
            phi_d,
            gbar,
        })
    }

    /// `phi_d` for `|d| <= k'`.
    pub fn phi(&self, d: i64) -> f64 {
        self.phi_d[(d + self.kp as i64) as usize]
    }
}

/// `k * sum_i (g_{i+1} - g_i)(g_{i-d+1} - g_{i-d})` with `g_j = 0` off `0..=k`.
pub fn discrete_phi(gbar: &[f64], d: i64) -> f64 {
    let k = gbar.len() as i64 - 1;
    let g = |j: i64| if (0..=k).contains(&j) { gbar[j as usize] } else { 0.0 };
    let lo = -1 + d.min(0);
    let hi = k + d.max(0);
    let mut acc = 0.0;
    for i in lo..=hi {
        acc += (g(i + 1) - g(i)) * (g(i - d + 1) - g(i - d));
    }
    k as f64 * acc
}

/// Weight constants at the tuning resolved for `m` grid points.
pub fn weight_constants(cfg: &PreAvgConfig, m: usize) -> Result<WeightConstants> {
    let t = cfg.resolve(m)?;
    WeightConstants::new(cfg.weight, t.k, t.kp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn triangular_closed_forms() {
        let c = cached_continuum(WeightFunction::Triangular);
        assert_abs_diff_eq!(c.psi0, 1.0 / 12.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.psi1, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.phi00, 151.0 / 80_640.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.phi01, 1.0 / 96.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.phi11, 1.0 / 6.0, epsilon = 1e-12);
    }

    #[test]
    fn sine_closed_forms() {
        let c = cached_continuum(WeightFunction::Sine);
        let pi = std::f64::consts::PI;
        assert_abs_diff_eq!(c.psi0, 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(c.psi1, pi * pi / 2.0, epsilon = 1e-10);
    }

    #[test]
    fn phi0_at_zero_is_psi0() {
        for w in [WeightFunction::Triangular, WeightFunction::Sine] {
            assert_abs_diff_eq!(phi0(w, 0.0), cached_continuum(w).psi0, epsilon = 1e-12);
        }
    }

    #[test]
    fn triangular_phi0_matches_polynomial_pieces() {
        // Closed form of the triangular autocorrelation on each half.
        let exact = |s: f64| {
            if s <= 0.5 {
                1.0 / 12.0 - s * s / 2.0 + s * s * s / 2.0
            } else {
                (1.0 - s).powi(3) / 6.0
            }
        };
        for s in [0.0, 0.1, 0.25, 0.5, 0.6, 0.9, 1.0] {
            assert_abs_diff_eq!(phi0(WeightFunction::Triangular, s), exact(s), epsilon = 1e-13);
        }
    }

    #[test]
    fn refinement_is_stable() {
        assert!(richardson_gap(WeightFunction::Triangular) < 1e-10);
    }

    #[test]
    fn discrete_phi_is_symmetric_and_converges() {
        let wc = WeightConstants::new(WeightFunction::Triangular, 152, 3).unwrap();
        for d in 1..=3 {
            assert_eq!(wc.phi(d), wc.phi(-d));
        }
        // For the triangular weight phi_0 = k * k * (1/k)^2 = psi1.
        assert_abs_diff_eq!(wc.phi(0), 1.0, epsilon = 1e-12);
        assert_eq!(wc.gbar.len(), 153);
    }

    #[test]
    fn small_window_is_rejected() {
        assert!(WeightConstants::new(WeightFunction::Triangular, 1, 2).is_err());
    }
}
