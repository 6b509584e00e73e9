use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::*;
use crate::types::{ThresholdScale, WindowNormalization};
use crate::weights::weight_constants;

/// Brownian market with daily variance `var`, asset `beta * market` plus an
/// idiosyncratic part, and i.i.d. noise of standard deviation `noise`.
fn synthetic_day(m: usize, beta: f64, var: f64, noise: f64, seed: u64) -> DayGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = (var / m as f64).sqrt();
    let (mut x1, mut x2) = (0.0, 0.0);
    let mut y1 = Vec::with_capacity(m);
    let mut y2 = Vec::with_capacity(m);
    for _ in 0..m {
        let z: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
        x1 += sd * z[0];
        x2 += beta * sd * z[0] + 0.5 * sd * z[1];
        y1.push(x1 + noise * z[2]);
        y2.push(x2 + noise * z[3]);
    }
    DayGrid::new(1, y1, y2).unwrap()
}

fn setup(m: usize) -> (PreAvgConfig, WeightConstants) {
    let cfg = PreAvgConfig::default();
    let wc = weight_constants(&cfg, m).unwrap();
    (cfg, wc)
}

#[test]
fn proportional_asset_recovers_the_slope_exactly() {
    let (cfg, wc) = setup(2340);
    let base = synthetic_day(2340, 0.0, 1e-3, 1e-4, 1);
    let y2: Vec<f64> = base.y1.iter().map(|v| 1.7 * v).collect();
    let day = DayGrid::new(1, base.y1.clone(), y2).unwrap();
    let est = rib_day(&day, &cfg, &wc).unwrap();
    assert_relative_eq!(est.rib, 1.7, max_relative = 1e-10);
    for spot in &est.spots {
        assert!(spot.debias.abs() < 1e-10, "debias {}", spot.debias);
    }
}

#[test]
fn debias_vanishes_for_proportional_noise_and_is_linear_in_the_gap() {
    let (cfg, wc) = setup(600);
    let tuning = cfg.resolve(600).unwrap();
    let spot = |t12: f64| SpotEstimate {
        l: 0,
        sigma_hat: [[2e-3, 3e-3], [3e-3, 9e-3]],
        sigma11_star: 2e-3,
        theta_hat: NoiseMoments {
            theta11: 1e-8,
            theta12: t12,
            theta22: 4e-8,
        },
        beta_hat: 1.5,
        debias: 0.0,
    };
    assert!(debias_term(&spot(1.5e-8), &tuning, &wc).abs() < 1e-18);
    let d1 = debias_term(&spot(1.0e-8), &tuning, &wc);
    let d2 = debias_term(&spot(0.5e-8), &tuning, &wc);
    assert!(d1 > 0.0);
    assert_relative_eq!(d2, 2.0 * d1, max_relative = 1e-12);
}

#[test]
fn swapping_assets_transposes_the_own_pair_terms() {
    let (cfg, wc) = setup(2340);
    let day = synthetic_day(2340, 1.3, 1e-3, 2e-4, 2);
    let swapped = DayGrid::new(1, day.y2.clone(), day.y1.clone()).unwrap();
    let a = DayContext::new(&day, &cfg, &wc).unwrap();
    let b = DayContext::new(&swapped, &cfg, &wc).unwrap();
    for l in a.block_starts() {
        let (sa, _) = a.sigma_hat(l).unwrap();
        let (sb, _) = b.sigma_hat(l).unwrap();
        assert_relative_eq!(sa[0][0], sb[1][1], max_relative = 1e-12);
        assert_relative_eq!(sa[1][1], sb[0][0], max_relative = 1e-12);
        let na = a.noise_moments(l).unwrap();
        let nb = b.noise_moments(l).unwrap();
        assert_relative_eq!(na.theta11, nb.theta22, max_relative = 1e-12);
        assert_relative_eq!(na.theta22, nb.theta11, max_relative = 1e-12);
    }
}

#[test]
fn estimate_is_close_to_the_slope_on_a_clean_day() {
    let (cfg, wc) = setup(23_400);
    let day = synthetic_day(23_400, 1.3, 1e-3, 1e-4, 3);
    let est = rib_day(&day, &cfg, &wc).unwrap();
    assert!((est.rib - 1.3).abs() < 0.1, "rib {}", est.rib);
    assert!(est.s_hat > 0.0);
    assert_eq!(est.spots.len(), cfg.resolve(23_400).unwrap().n_blocks);
    assert_eq!(est.diagnostics.clamped_denominators, 0);
}

#[test]
fn constant_market_hits_the_floor_without_failing() {
    let (cfg, wc) = setup(600);
    let day = synthetic_day(600, 1.0, 1e-3, 0.0, 4);
    let flat = DayGrid::new(1, vec![4.6; 600], day.y2.clone()).unwrap();
    let est = rib_day(&flat, &cfg, &wc).unwrap();
    assert!(est.rib.is_finite());
    assert_eq!(est.diagnostics.clamped_denominators, est.spots.len());
}

#[test]
fn level_shift_leaves_the_estimate_unchanged() {
    let (cfg, wc) = setup(2340);
    let day = synthetic_day(2340, 0.8, 1e-3, 2e-4, 5);
    let shifted = DayGrid::new(
        1,
        day.y1.iter().map(|v| v + 3.0).collect(),
        day.y2.iter().map(|v| v - 1.0).collect(),
    )
    .unwrap();
    let a = rib_day(&day, &cfg, &wc).unwrap();
    let b = rib_day(&shifted, &cfg, &wc).unwrap();
    assert_relative_eq!(a.rib, b.rib, max_relative = 1e-6);
}

#[test]
fn robust_threshold_ignores_a_jump_that_inflates_the_sample_sd() {
    let m = 2340;
    let (cfg, wc) = setup(m);
    let day = synthetic_day(m, 1.0, 1e-3, 1e-4, 6);
    let mut y1 = day.y1.clone();
    for v in &mut y1[m / 2..] {
        *v += 0.3;
    }
    let jumped = DayGrid::new(1, y1, day.y2.clone()).unwrap();
    let sd_cfg = PreAvgConfig {
        threshold_scale: ThresholdScale::SampleSd,
        ..cfg.clone()
    };
    let mad_clean = DayContext::new(&day, &cfg, &wc).unwrap().thresholds[0];
    let mad_jump = DayContext::new(&jumped, &cfg, &wc).unwrap();
    let sd_clean = DayContext::new(&day, &sd_cfg, &wc).unwrap().thresholds[0];
    let sd_jump = DayContext::new(&jumped, &sd_cfg, &wc).unwrap().thresholds[0];
    assert!((mad_jump.thresholds[0] / mad_clean - 1.0).abs() < 0.05);
    assert!(sd_jump / sd_clean > 2.0);
    assert!(mad_jump.truncated_windows() >= wc.k / 2);
    assert!(mad_jump.screened_positions() > 0);
}

#[test]
fn kept_normalization_is_nominal_when_nothing_is_truncated() {
    let m = 2340;
    let (cfg, wc) = setup(m);
    let day = synthetic_day(m, 1.0, 1e-3, 1e-4, 7);
    let loose = PreAvgConfig {
        trunc_mult: 1e6,
        ..cfg.clone()
    };
    let nominal = PreAvgConfig {
        window_normalization: WindowNormalization::Nominal,
        ..loose.clone()
    };
    let a = rib_day(&day, &loose, &wc).unwrap();
    let b = rib_day(&day, &nominal, &wc).unwrap();
    assert_eq!(a.diagnostics.truncated_windows, 0);
    assert_relative_eq!(a.rib, b.rib, max_relative = 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn raising_the_threshold_never_truncates_more(seed in 0u64..1000, lo in 0.5f64..4.0, extra in 0.0f64..4.0) {
        let (cfg, wc) = setup(600);
        let day = synthetic_day(600, 1.0, 1e-3, 2e-4, seed);
        let tight = PreAvgConfig { trunc_mult: lo, ..cfg.clone() };
        let wide = PreAvgConfig { trunc_mult: lo + extra, ..cfg };
        let a = DayContext::new(&day, &tight, &wc).unwrap().truncated_windows();
        let b = DayContext::new(&day, &wide, &wc).unwrap().truncated_windows();
        prop_assert!(b <= a);
    }

    #[test]
    fn scaling_the_asset_scales_the_estimate(seed in 0u64..1000, scale in 0.1f64..10.0) {
        let (cfg, wc) = setup(600);
        let day = synthetic_day(600, 1.2, 1e-3, 2e-4, seed);
        let scaled = DayGrid::new(1, day.y1.clone(), day.y2.iter().map(|v| scale * v).collect()).unwrap();
        let a = rib_day(&day, &cfg, &wc).unwrap();
        let b = rib_day(&scaled, &cfg, &wc).unwrap();
        prop_assert!((b.rib - scale * a.rib).abs() <= 1e-8 * (1.0 + (scale * a.rib).abs()));
    }
}

