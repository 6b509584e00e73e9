//! Acceptance suite: ten end-to-end criteria, each printing one PASS/FAIL
//! line at its stated tolerance.
//!
//! Run with `cargo test -p ribeta-core --test acceptance -- --nocapture` to see
//! the measured values next to each verdict. Criteria listed in
//! [`KNOWN_FAILURES`] are still computed and reported at full tolerance; the
//! test only refuses to let their status change silently.

mod support;

use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use ribeta_core::estimators::{chen_day, noise_cross_term, preavg_series, prvb_day, rib_day};
use ribeta_core::harness::{
    run_mc, simulate_and_estimate, weights_for_grid, McStudySpec, Proxy, ReplicationData, RunOptions,
    StudyKind,
};
use ribeta_core::model::{
    bic_select, fit, forecast, h_gradient, h_recursion, reduced_form, z_statistics, DrBetaParams,
    FitOptions, RecursionInit,
};
use ribeta_core::simulator::{
    martingale_variance, simulate_beta_truth, simulate_replication, unconditional_means, SimConfig,
};
use ribeta_core::stats::{batch_means_se, ks_normal, mean, variance};
use ribeta_core::types::PreAvgConfig;
use ribeta_core::weights::{continuum_constants, weight_constants, WeightFunction};

use support::naive::{naive_day, NaiveConfig};

/// Criteria whose stated tolerance the reference design does not meet with
/// the default estimator; see the README for the measured values.
const KNOWN_FAILURES: &[u32] = &[4, 5, 10];

fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    let line = format!(
        "criterion {id:>2} {}: {name} | {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    // Written straight to the process stdout so the line survives output
    // capture.
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    let expected = !KNOWN_FAILURES.contains(&id);
    assert_eq!(pass, expected, "criterion {id} changed status: {detail}");
}

/// Largest entrywise difference relative to the largest reference magnitude.
fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    assert_eq!(got.len(), want.len());
    let scale = want.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let diff = got.iter().zip(want).fold(0.0_f64, |a, (g, w)| a.max((g - w).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

#[test]
fn c01_oracle_equivalence() {
    let start = Instant::now();
    let m = 600;
    let cfg = PreAvgConfig::default();
    let wc = weight_constants(&cfg, m).unwrap();
    let t = cfg.resolve(m).unwrap();
    let sim = SimConfig {
        m_per_day: m,
        n_days: 20,
        seed: 2024,
        keep_latent: false,
        ..SimConfig::default()
    };
    let panel = simulate_replication(&sim, 0).unwrap().panel;
    let ncfg = NaiveConfig {
        trunc_mult: cfg.trunc_mult,
        varpi1: cfg.varpi1,
        delta_floor: cfg.delta_floor,
    };
    let names = ["P~", "E", "v", "theta", "B", "RIB", "S", "CHEN", "PRVB"];
    let mut worst = [0.0_f64; 9];
    for day in &panel.days {
        let naive = naive_day([&day.y1, &day.y2], &t, &wc, &ncfg);
        let est = rib_day(day, &cfg, &wc).unwrap();
        let pa = [preavg_series(&day.y1, &wc.gbar).unwrap(), preavg_series(&day.y2, &wc.gbar).unwrap()];
        let mut errs = [0.0; 9];
        errs[0] = rel_err(&pa[0], &naive.pa[0]).max(rel_err(&pa[1], &naive.pa[1]));
        let ys = [(&day.y1, &day.y1), (&day.y1, &day.y2), (&day.y2, &day.y2)];
        for (p, (a, b)) in ys.iter().enumerate() {
            let kp = t.kp as i64;
            let got: Vec<f64> = (0..naive.e[p].len())
                .flat_map(|j| (-kp..=kp).map(move |d| (j, d)))
                .map(|(j, d)| noise_cross_term(a, b, j, d, t.l).unwrap())
                .collect();
            let want: Vec<f64> = naive.e[p].iter().flatten().copied().collect();
            errs[1] = errs[1].max(rel_err(&got, &want));
        }
        let flat = |f: &dyn Fn(usize) -> [f64; 3]| -> Vec<f64> { (0..est.spots.len()).flat_map(f).collect() };
        let v_got = flat(&|i| {
            let s = est.spots[i].sigma_hat;
            [s[0][0], s[0][1], s[1][1]]
        });
        let v_want: Vec<f64> = naive.sigma.iter().flatten().copied().collect();
        errs[2] = rel_err(&v_got, &v_want);
        let th_got = flat(&|i| {
            let th = est.spots[i].theta_hat;
            [th.theta11, th.theta12, th.theta22]
        });
        let th_want: Vec<f64> = naive.theta.iter().flatten().copied().collect();
        errs[3] = rel_err(&th_got, &th_want);
        let b_got: Vec<f64> = est.spots.iter().flat_map(|s| [s.beta_hat, s.debias]).collect();
        let b_want: Vec<f64> = naive.beta.iter().zip(&naive.debias).flat_map(|(b, d)| [*b, *d]).collect();
        errs[4] = rel_err(&b_got, &b_want);
        errs[5] = rel_err(&[est.rib], &[naive.rib]);
        errs[6] = rel_err(&[est.s_hat], &[naive.s_hat]);
        errs[7] = rel_err(&[chen_day(day, &cfg, &wc).unwrap()], &[naive.chen]);
        errs[8] = rel_err(&[prvb_day(day, &cfg, &wc).unwrap()], &[naive.prvb]);
        for (w, e) in worst.iter_mut().zip(errs) {
            *w = w.max(e);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let max_err = worst.iter().copied().fold(0.0, f64::max);
    let detail = names
        .iter()
        .zip(worst)
        .map(|(n, e)| format!("{n} {e:.1e}"))
        .collect::<Vec<_>>()
        .join(", ");
    verdict(
        1,
        "oracle equivalence on 20 days at m = 600",
        max_err < 1e-10 && elapsed < 60.0,
        &format!("{detail}; {elapsed:.1} s"),
    );
}

#[test]
fn c02_weight_constants() {
    let c = continuum_constants(WeightFunction::Triangular, 1 << 14);
    let coarse = continuum_constants(WeightFunction::Triangular, 1 << 12);
    let fine = continuum_constants(WeightFunction::Triangular, 1 << 16);
    let psi_ok = (c.psi0 - 1.0 / 12.0).abs() < 1e-8 && (c.psi1 - 1.0).abs() < 1e-8;
    let drift = [
        (coarse.phi00 - fine.phi00).abs(),
        (coarse.phi01 - fine.phi01).abs(),
        (coarse.phi11 - fine.phi11).abs(),
        (c.phi00 - fine.phi00).abs(),
        (c.phi01 - fine.phi01).abs(),
        (c.phi11 - fine.phi11).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    verdict(
        2,
        "triangular psi0 = 1/12, psi1 = 1, Phi stable under refinement",
        psi_ok && drift < 1e-8,
        &format!(
            "psi0 {:.12}, psi1 {:.12}, Phi ({:.3e}, {:.3e}, {:.3e}), refinement drift {drift:.1e}",
            c.psi0, c.psi1, c.phi00, c.phi01, c.phi11
        ),
    );
}

#[test]
fn c03_estimator_mse_ordering() {
    let spec = McStudySpec {
        study: StudyKind::EstimatorMse,
        replications: 100,
        m_grid: vec![2340, 4680, 23_400],
        n_grid: vec![5],
        sim: SimConfig::default(),
        cfg: PreAvgConfig::default(),
        seed: 303,
        proxy: Proxy::Rib,
        fit: FitOptions::default(),
    };
    let report = run_mc(&spec, &RunOptions::default()).unwrap();
    let mse = |m: usize, key: &str| report.cell(m, 5).unwrap().metrics[key];
    let rib: Vec<f64> = spec.m_grid.iter().map(|&m| mse(m, "rib_mse")).collect();
    let prvb = mse(23_400, "prvb_mse");
    let pass = rib[0] > rib[1] && rib[1] > rib[2] && rib[2] < prvb;
    verdict(
        3,
        "MSE(RIB) decreasing in m and below MSE(PRVB) at m = 23400",
        pass,
        &format!(
            "MSE(RIB) {:.4} / {:.4} / {:.4}, MSE(PRVB) at 23400 {prvb:.4}, RIB bias at 23400 {:.4}",
            rib[0],
            rib[1],
            rib[2],
            mse(23_400, "rib_bias")
        ),
    );
}

#[test]
fn c04_clt_coverage() {
    let spec = McStudySpec {
        study: StudyKind::CltCoverage,
        replications: 200,
        m_grid: vec![23_400],
        n_grid: vec![1],
        sim: SimConfig::default(),
        cfg: PreAvgConfig::default(),
        seed: 404,
        proxy: Proxy::Rib,
        fit: FitOptions::default(),
    };
    let report = run_mc(&spec, &RunOptions::default()).unwrap();
    let cell = report.cell(23_400, 1).unwrap();
    let cov = cell.metrics.get("coverage_95").copied().unwrap_or(f64::NAN);
    let ks = cell.metrics.get("ks_normal").copied().unwrap_or(f64::NAN);
    verdict(
        4,
        "standardized RIB error: 95% coverage in [0.90, 0.98], KS < 0.10",
        (0.90..=0.98).contains(&cov) && ks < 0.10,
        &format!(
            "coverage {cov:.3}, KS {ks:.3}, z mean {:.3}, z sd {:.3}, {} statistics",
            cell.metrics.get("z_mean").copied().unwrap_or(f64::NAN),
            cell.metrics.get("z_sd").copied().unwrap_or(f64::NAN),
            cell.metrics.get("count").copied().unwrap_or(0.0)
        ),
    );
}

/// 200 replications of 500 days at m = 23400; the first 100 also carry the
/// competitor estimates.
fn high_frequency_panels() -> &'static Vec<ReplicationData> {
    static DATA: OnceLock<Vec<ReplicationData>> = OnceLock::new();
    DATA.get_or_init(|| {
        let cfg = PreAvgConfig::default();
        let sim = SimConfig {
            n_days: 500,
            seed: 505,
            keep_latent: false,
            ..SimConfig::default()
        };
        let weights = weights_for_grid(&cfg, &[23_400]).unwrap();
        (0..200u64)
            .into_par_iter()
            .map(|rep| simulate_and_estimate(&sim, &cfg, &weights, &[23_400], rep, rep < 100).unwrap())
            .collect()
    })
}

fn true_integrals(n: usize, reps: u64, seed: u64) -> Vec<Vec<f64>> {
    let sim = SimConfig {
        n_days: n,
        seed,
        keep_latent: false,
        ..SimConfig::default()
    };
    (0..reps)
        .into_par_iter()
        .map(|rep| simulate_beta_truth(&sim, rep).unwrap().ibeta)
        .collect()
}

fn fit_opts(seed: u64) -> FitOptions {
    FitOptions {
        seed,
        ..FitOptions::default()
    }
}

/// Sample covariance of the rows of `x`.
fn sample_cov(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = x[0].len();
    let n = x.len() as f64;
    let mu: Vec<f64> = (0..k).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    (0..k)
        .map(|i| {
            (0..k)
                .map(|j| x.iter().map(|r| (r[i] - mu[i]) * (r[j] - mu[j])).sum::<f64>() / (n - 1.0))
                .collect()
        })
        .collect()
}

#[test]
fn c05_qmle_recovery() {
    let theta_star = reduced_form(&SimConfig::default().beta);
    let star = theta_star.to_vec();

    let sup_err = |n: usize| -> f64 {
        let series = true_integrals(n, 50, 5050 + n as u64);
        let errs: Vec<f64> = series
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let f = fit(s, 1, 1, &fit_opts(i as u64)).unwrap();
                f.theta_hat.to_vec().iter().zip(&star).fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()))
            })
            .collect();
        mean(&errs)
    };
    let (e100, e500) = (sup_err(100), sup_err(500));
    let recovery = e500 < e100;

    // Covariance of sqrt(n)(theta_hat - theta*) against the mean V-hat.
    let n = 500;
    let series = true_integrals(n, 200, 5500);
    let fits: Vec<(Vec<f64>, Vec<Vec<f64>>, Vec<f64>)> = series
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let f = fit(s, 1, 1, &fit_opts(i as u64)).unwrap();
            let scaled = f.theta_hat.to_vec().iter().zip(&star).map(|(a, b)| (n as f64).sqrt() * (a - b)).collect();
            let z = z_statistics(&f, &theta_star).unwrap();
            (scaled, f.vhat, z)
        })
        .collect();
    let scaled: Vec<Vec<f64>> = fits.iter().map(|f| f.0.clone()).collect();
    let emp = sample_cov(&scaled);
    let k = star.len();
    let mut var_err: f64 = 0.0;
    let mut entry_err: f64 = 0.0;
    let (mut diff_sq, mut norm_sq) = (0.0, 0.0);
    for i in 0..k {
        for j in 0..k {
            let v = mean(&fits.iter().map(|f| f.1[i][j]).collect::<Vec<_>>());
            let rel = (emp[i][j] - v).abs() / v.abs();
            entry_err = entry_err.max(rel);
            if i == j {
                var_err = var_err.max(rel);
            }
            diff_sq += (emp[i][j] - v).powi(2);
            norm_sq += v * v;
        }
    }
    let frob_err = (diff_sq / norm_sq).sqrt();
    let covariance = var_err <= 0.35 && frob_err <= 0.35;
    let ks_truth = (0..k)
        .map(|j| ks_normal(&fits.iter().map(|f| f.2[j]).collect::<Vec<_>>()).unwrap())
        .fold(0.0, f64::max);

    // Wald statistics on RIB at n = 500, m = 23400.
    let panels = high_frequency_panels();
    let z: Vec<Vec<f64>> = panels
        .par_iter()
        .enumerate()
        .map(|(i, d)| {
            let rib: Vec<f64> = d.days[0].iter().map(|r| r.rib).collect();
            let f = fit(&rib, 1, 1, &fit_opts(i as u64)).unwrap();
            z_statistics(&f, &theta_star).unwrap()
        })
        .collect();
    let ks: Vec<f64> = (0..k)
        .map(|j| ks_normal(&z.iter().map(|r| r[j]).collect::<Vec<_>>()).unwrap())
        .collect();
    let ks_max = ks.iter().copied().fold(0.0, f64::max);
    let z_means: Vec<String> = (0..k)
        .map(|j| format!("{:.2}", mean(&z.iter().map(|r| r[j]).collect::<Vec<_>>())))
        .collect();
    verdict(
        5,
        "QMLE recovery, covariance accuracy and Wald normality",
        recovery && covariance && ks_max < 0.10,
        &format!(
            "mean sup error n=100 {e100:.4} vs n=500 {e500:.4}; covariance rel. error: variances {var_err:.3}, \
             matrix {frob_err:.3}, worst entry {entry_err:.3}; Wald KS on RIB {:?} (max {ks_max:.3}), \
             Wald means on RIB [{}]; Wald KS on true integrals (max) {ks_truth:.3}",
            ks.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>(),
            z_means.join(", ")
        ),
    );
}

#[test]
fn c06_gradient_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let p = rng.random_range(0..=2usize);
        let q = rng.random_range(if p == 0 { 1 } else { 0 }..=2usize);
        let mut theta = DrBetaParams::zeros(p, q);
        theta.omega = rng.random_range(0.2..2.0);
        // Keep every draw well inside the stationary region.
        for g in &mut theta.gamma {
            *g = rng.random_range(-0.3..0.3);
        }
        for a in &mut theta.alpha {
            *a = rng.random_range(-0.3..0.3);
        }
        let n = rng.random_range(20..80);
        let rib: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..3.0)).collect();
        let init = RecursionInit::sample_mean(&rib);
        let analytic = h_gradient(&theta, &rib, init).unwrap();
        let x = theta.to_vec();
        for (i, xi) in x.iter().enumerate() {
            let step = 1e-6 * xi.abs().max(1.0);
            let at = |delta: f64| {
                let mut v = x.clone();
                v[i] += delta;
                h_recursion(&DrBetaParams::from_vec(p, q, &v).unwrap(), &rib, init).unwrap()
            };
            let (up, down) = (at(step), at(-step));
            for t in 0..n {
                let numeric = (up[t] - down[t]) / (2.0 * step);
                let a = analytic[t][i];
                let denom = a.abs().max(numeric.abs()).max(1e-3);
                worst = worst.max((a - numeric).abs() / denom);
            }
        }
    }
    verdict(
        6,
        "analytic recursion gradient vs central differences",
        worst < 1e-6,
        &format!("max relative error {worst:.2e} over 100 draws"),
    );
}

#[test]
fn c07_forecast_msfe() {
    let panels = high_frequency_panels();
    let theta_star = reduced_form(&SimConfig::default().beta);
    let errs: Vec<(f64, f64, f64)> = panels[..100]
        .par_iter()
        .enumerate()
        .map(|(i, d)| {
            let one = |pick: fn(&ribeta_core::harness::DailyRecord) -> f64| {
                let series: Vec<f64> = d.days[0].iter().map(pick).collect();
                let f = fit(&series, theta_star.p, theta_star.q, &fit_opts(i as u64)).unwrap();
                let next = forecast(&f.theta_hat, &series, RecursionInit::sample_mean(&series)).unwrap();
                (next - d.h_next).powi(2)
            };
            (one(|r| r.rib), one(|r| r.prvb), one(|r| r.chen))
        })
        .collect();
    let drbeta = mean(&errs.iter().map(|e| e.0).collect::<Vec<_>>());
    let prvb = mean(&errs.iter().map(|e| e.1).collect::<Vec<_>>());
    let chen = mean(&errs.iter().map(|e| e.2).collect::<Vec<_>>());
    verdict(
        7,
        "MSFE(DR Beta on RIB) <= MSFE(ARMA on PRVB) at n = 500, m = 23400",
        drbeta <= prvb,
        &format!("MSFE DR Beta {drbeta:.5}, ARMA-PRVB {prvb:.5}, ARMA-CHEN {chen:.5}"),
    );
}

#[test]
fn c08_daily_truth_moments() {
    let sim = SimConfig {
        n_days: 10_000,
        seed: 808,
        keep_latent: false,
        ..SimConfig::default()
    };
    let t = simulate_beta_truth(&sim, 0).unwrap();
    let n = t.ibeta.len();
    let d: Vec<f64> = t.ibeta.iter().zip(&t.h).map(|(i, h)| i - h).collect();
    let d_mean = mean(&d);
    let d_se = (variance(&d) / n as f64).sqrt();
    let d_var = variance(&d);
    let target_var = martingale_variance(&sim.beta);
    let h = &t.h[..n];
    let h_mean = mean(h);
    let h_se = batch_means_se(h, 50);
    let (closed_form, _) = unconditional_means(&sim.beta);
    let pass = d_mean.abs() <= 4.0 * d_se
        && (d_var / target_var - 1.0).abs() <= 0.10
        && (h_mean - closed_form).abs() <= 3.0 * h_se;
    verdict(
        8,
        "martingale difference mean and variance, mean of h",
        pass,
        &format!(
            "mean D {d_mean:.5} (s.e. {d_se:.5}); var D {d_var:.5} vs {target_var:.5}; \
             mean h {h_mean:.4} vs {closed_form:.4} (s.e. {h_se:.4})"
        ),
    );
}

#[test]
fn c09_determinism_across_threads() {
    let spec = McStudySpec {
        study: StudyKind::ParameterMse,
        replications: 6,
        m_grid: vec![600, 300],
        n_grid: vec![60],
        sim: SimConfig {
            m_per_day: 600,
            ..SimConfig::default()
        },
        cfg: PreAvgConfig::default(),
        seed: 909,
        proxy: Proxy::Rib,
        fit: FitOptions::default(),
    };
    let run = |threads| {
        run_mc(
            &spec,
            &RunOptions {
                threads: Some(threads),
                ..Default::default()
            },
        )
        .unwrap()
        .to_json()
        .unwrap()
    };
    let (a, b) = (run(1), run(4));
    verdict(
        9,
        "mc-study reports identical across thread counts",
        a.as_bytes() == b.as_bytes(),
        &format!("{} bytes with 1 thread, {} bytes with 4", a.len(), b.len()),
    );
}

#[test]
fn c10_bic_selection() {
    let series = true_integrals(2000, 50, 1010);
    let runs: Vec<((usize, usize), f64)> = series
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let sel = bic_select(s, 2, 2, &fit_opts(i as u64)).unwrap();
            let bic = |p, q| {
                sel.fits
                    .iter()
                    .find(|f| f.p == p && f.q == q)
                    .and_then(|f| f.fit.as_ref().ok())
                    .map_or(f64::NAN, |f| f.bic)
            };
            ((sel.p, sel.q), bic(1, 1) - bic(1, 0))
        })
        .collect();
    let picks: Vec<(usize, usize)> = runs.iter().map(|r| r.0).collect();
    let gap = mean(&runs.iter().map(|r| r.1).collect::<Vec<_>>());
    let hits = picks.iter().filter(|&&pq| pq == (1, 1)).count();
    let share = hits as f64 / picks.len() as f64;
    let mut counts = std::collections::BTreeMap::new();
    for pq in &picks {
        *counts.entry(*pq).or_insert(0) += 1;
    }
    verdict(
        10,
        "BIC selects (1, 1) in at least 80% of replications",
        share >= 0.80,
        &format!("share {share:.2}; selections {counts:?}; mean BIC(1,1) - BIC(1,0) {gap:.2}"),
    );
}
