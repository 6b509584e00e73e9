use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use ribeta_core::harness::{
    estimate_panel, read_estimates_csv, residual_diagnostic, rolling_eval_table, write_estimates_csv,
};
use ribeta_core::model::FitOptions;
use ribeta_core::simulator::{simulate_replication, SimConfig};
use ribeta_core::types::PreAvgConfig;

fn clean_design(m: usize, n_days: usize) -> SimConfig {
    let mut sim = SimConfig {
        m_per_day: m,
        n_days,
        seed: 21,
        ..SimConfig::default()
    };
    sim.jumps.lambda1 = 0.0;
    sim.jumps.lambda2 = 0.0;
    sim.noise.s1 = 0.0;
    sim.noise.s2 = 0.0;
    sim
}

fn rib_mse(m: usize) -> f64 {
    let out = simulate_replication(&clean_design(m, 20), 0).unwrap();
    let table = estimate_panel(&out.panel, &PreAvgConfig::default()).unwrap();
    assert!(table.skipped.is_empty());
    let err: f64 = table
        .rows
        .iter()
        .zip(&out.truth.ibeta)
        .map(|(r, b)| (r.rib - b).powi(2))
        .sum();
    err / table.rows.len() as f64
}

#[test]
fn error_on_clean_prices_shrinks_with_sampling_frequency() {
    let coarse = rib_mse(2_340);
    let fine = rib_mse(23_400);
    assert!(fine < coarse, "mse {fine} at 23400 vs {coarse} at 2340");
}

#[test]
fn rolling_evaluation_survives_the_estimates_file() {
    let out = simulate_replication(&clean_design(600, 90), 3).unwrap();
    let table = estimate_panel(&out.panel, &PreAvgConfig::default()).unwrap();
    let mut buf = Vec::new();
    write_estimates_csv(&table, &mut buf).unwrap();
    let back = read_estimates_csv(buf.as_slice()).unwrap();

    let opts = FitOptions {
        n_starts: 2,
        ..FitOptions::default()
    };
    let direct = rolling_eval_table(&table, 60, 1, 1, &opts).unwrap();
    let reread = rolling_eval_table(&back, 60, 1, 1, &opts).unwrap();
    assert_eq!(direct.targets.len(), 30);
    for (a, b) in direct.models.iter().zip(&reread.models) {
        assert_eq!(a.name, b.name);
        assert_eq!(a.forecasts, b.forecasts);
    }
}

#[test]
fn residual_diagnostic_tells_white_from_persistent_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 2_000;
    let forecasts: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * (i as f64 * 0.1).sin()).collect();
    let white: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut persistent = vec![0.0; n];
    for i in 1..n {
        persistent[i] = 0.8 * persistent[i - 1] + white[i];
    }
    let target = |e: &[f64]| -> Vec<f64> { forecasts.iter().zip(e).map(|(f, e)| f + 0.1 * e).collect() };

    let good = residual_diagnostic(&target(&white), &forecasts).unwrap();
    assert!((good.slope - 1.0).abs() < 0.1, "slope {}", good.slope);
    assert!(good.residual_acf[1].abs() < 0.1);

    let bad = residual_diagnostic(&target(&persistent), &forecasts).unwrap();
    assert!((bad.residual_acf[1] - 0.8).abs() < 0.05, "acf(1) {}", bad.residual_acf[1]);
}
