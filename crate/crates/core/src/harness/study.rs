//! Monte Carlo studies over grids of intraday frequencies and sample lengths.
//!
//! Each replication simulates one panel with its own random stream, estimates
//! every cell of the `(m, n)` grid from it and reduces the cell to a few named
//! values. Replications run in parallel and are reassembled in replication
//! order, so a report depends only on the study description.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{chen_from_context, prvb_from_context, rib_from_context, DayContext};
use crate::model::{fit, forecast, reduced_form, z_statistics, DrBetaParams, FitOptions, RecursionInit};
use crate::simulator::{simulate_beta_truth, DaySimulator, SimConfig};
use crate::stats::{ks_normal, mean, std_dev};
use crate::types::{PreAvgConfig, Tuning};
use crate::weights::{weight_constants, WeightConstants};

/// Version of the report and checkpoint layout.
pub const SCHEMA_VERSION: u32 = 1;

/// What a study measures per cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    /// Mean squared error of RIB, CHEN and PRVB against the daily integrals.
    EstimatorMse,
    /// Error of the fitted parameters and the accuracy of their covariance.
    ParameterMse,
    /// Normality of the Wald statistics at the true parameters.
    QqNormality,
    /// Squared error of one-day-ahead forecasts against the true conditional
    /// mean.
    MsfeForecast,
    /// Coverage and normality of the standardized daily RIB error.
    CltCoverage,
}

/// Series the parameter studies fit the model to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Proxy {
    /// Daily RIB estimates from the simulated prices.
    #[default]
    Rib,
    /// The simulated daily integrals themselves.
    TrueIntegral,
}

/// Full description of a Monte Carlo study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McStudySpec {
    pub study: StudyKind,
    pub replications: usize,
    /// Intraday frequencies; each must divide `sim.m_per_day`.
    pub m_grid: Vec<usize>,
    /// Days per replication.
    pub n_grid: Vec<usize>,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub cfg: PreAvgConfig,
    pub seed: u64,
    #[serde(default)]
    pub proxy: Proxy,
    #[serde(default)]
    pub fit: FitOptions,
}

impl McStudySpec {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("a study needs at least one replication".into()));
        }
        if self.m_grid.is_empty() || self.n_grid.is_empty() {
            return Err(Error::Config("m_grid and n_grid must be non-empty".into()));
        }
        self.sim.validate()?;
        self.cfg.validate()?;
        if let Some(m) = self.m_grid.iter().find(|m| **m == 0 || self.sim.m_per_day % **m != 0) {
            return Err(Error::Config(format!(
                "m = {m} does not divide the simulated frequency {}",
                self.sim.m_per_day
            )));
        }
        if self.n_grid.contains(&0) {
            return Err(Error::Config("n_grid entries must be positive".into()));
        }
        Ok(())
    }

    fn sim_for(&self, n: usize) -> SimConfig {
        SimConfig {
            n_days: n,
            seed: self.seed,
            keep_latent: false,
            ..self.sim.clone()
        }
    }

    fn needs_fit(&self) -> bool {
        matches!(
            self.study,
            StudyKind::ParameterMse | StudyKind::QqNormality | StudyKind::MsfeForecast
        )
    }

    fn needs_competitors(&self) -> bool {
        matches!(self.study, StudyKind::EstimatorMse | StudyKind::MsfeForecast)
    }
}

/// Run-time settings that do not change the results.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    /// JSONL file receiving each finished replication; existing records are
    /// reused.
    pub checkpoint: Option<PathBuf>,
    /// Stop after this many new replications (the report is then partial).
    pub max_new_replications: Option<usize>,
}

/// Daily estimates and truth of one simulated day at one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyRecord {
    pub ibeta: f64,
    /// Conditional mean of `ibeta` given the previous close.
    pub h: f64,
    pub rib: f64,
    pub s_hat: f64,
    pub chen: f64,
    pub prvb: f64,
}

/// Simulated days of one replication estimated at every frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationData {
    /// `days[i][d]`: day `d` at `m_grid[i]`.
    pub days: Vec<Vec<DailyRecord>>,
    /// Conditional mean of the day after the last one.
    pub h_next: f64,
}

/// Weight constants of every frequency in `m_grid`.
pub fn weights_for_grid(cfg: &PreAvgConfig, m_grid: &[usize]) -> Result<Vec<WeightConstants>> {
    m_grid.iter().map(|&m| weight_constants(cfg, m)).collect()
}

/// Simulates `sim.n_days` days of `replication` and estimates each at every
/// frequency of `m_grid`. Competitors are left as `NaN` unless requested.
pub fn simulate_and_estimate(
    sim: &SimConfig,
    cfg: &PreAvgConfig,
    weights: &[WeightConstants],
    m_grid: &[usize],
    replication: u64,
    competitors: bool,
) -> Result<ReplicationData> {
    let mut simulator = DaySimulator::new(sim, replication)?;
    let mut days = vec![Vec::with_capacity(sim.n_days); m_grid.len()];
    for _ in 0..sim.n_days {
        let day = simulator.next_day()?;
        for ((m, wc), out) in m_grid.iter().zip(weights).zip(days.iter_mut()) {
            let grid = day.grid.subsample(sim.m_per_day / m)?;
            let ctx = DayContext::new(&grid, cfg, wc)?;
            let est = rib_from_context(&ctx, grid.day_index)?;
            let (chen, prvb) = if competitors {
                (chen_from_context(&ctx)?, prvb_from_context(&ctx)?)
            } else {
                (f64::NAN, f64::NAN)
            };
            out.push(DailyRecord {
                ibeta: day.ibeta,
                h: day.h,
                rib: est.rib,
                s_hat: est.s_hat,
                chen,
                prvb,
            });
        }
    }
    Ok(ReplicationData {
        days,
        h_next: simulator.next_conditional_mean(),
    })
}

/// Named values of one `(m, n)` cell in one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepCell {
    pub m: usize,
    pub n: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub values: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Every cell of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub replication: u64,
    pub cells: Vec<RepCell>,
}

/// Aggregated metrics of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub m: usize,
    pub n: usize,
    /// Replications that produced values.
    pub ok: usize,
    pub failed: usize,
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Everything needed to rerun a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub spec: McStudySpec,
    /// Resolved tuning per frequency.
    pub tunings: Vec<Tuning>,
    /// Reduced-form parameters implied by the simulated diffusion.
    pub theta_star: DrBetaParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub schema_version: u32,
    pub manifest: Manifest,
    pub cells: Vec<CellReport>,
    pub replications: Vec<RepRecord>,
    /// False when the run stopped before every replication finished.
    pub complete: bool,
}

impl StudyReport {
    pub fn cell(&self, m: usize, n: usize) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.m == m && c.n == n)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn finite(v: impl IntoIterator<Item = f64>) -> Vec<f64> {
    v.into_iter().filter(|x| x.is_finite()).collect()
}

fn fit_seed(seed: u64, replication: u64) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(replication)
}

fn values(pairs: Vec<(&str, Vec<f64>)>) -> BTreeMap<String, Vec<f64>> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn estimator_values(days: &[DailyRecord]) -> BTreeMap<String, Vec<f64>> {
    let sq = |f: fn(&DailyRecord) -> f64| mean(&finite(days.iter().map(|d| (f(d) - d.ibeta).powi(2))));
    values(vec![
        ("rib_mse", vec![sq(|d| d.rib)]),
        ("chen_mse", vec![sq(|d| d.chen)]),
        ("prvb_mse", vec![sq(|d| d.prvb)]),
        ("rib_bias", vec![mean(&days.iter().map(|d| d.rib - d.ibeta).collect::<Vec<_>>())]),
    ])
}

fn clt_values(days: &[DailyRecord], m: usize) -> BTreeMap<String, Vec<f64>> {
    let scale = (m as f64).powf(0.25);
    let z: Vec<f64> = days
        .iter()
        .filter(|d| d.s_hat > 0.0)
        .map(|d| scale * (d.rib - d.ibeta) / d.s_hat.sqrt())
        .filter(|z| z.is_finite())
        .collect();
    let invalid = (days.len() - z.len()) as f64;
    values(vec![("z", z), ("invalid_days", vec![invalid])])
}

fn parameter_values(series: &[f64], theta_star: &DrBetaParams, opts: &FitOptions) -> Result<BTreeMap<String, Vec<f64>>> {
    let f = fit(series, theta_star.p, theta_star.q, opts)?;
    let err: Vec<f64> = f.theta_hat.to_vec().iter().zip(theta_star.to_vec()).map(|(a, b)| a - b).collect();
    let z = z_statistics(&f, theta_star)?;
    Ok(values(vec![
        ("theta_err", err),
        ("vhat", f.vhat.iter().flatten().copied().collect()),
        ("z", z),
        ("converged", vec![f64::from(u8::from(f.converged))]),
    ]))
}

fn msfe_values(
    days: &[DailyRecord],
    h_next: f64,
    theta_star: &DrBetaParams,
    opts: &FitOptions,
) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut out = BTreeMap::new();
    for (name, pick) in [
        ("drbeta_sq_err", (|d: &DailyRecord| d.rib) as fn(&DailyRecord) -> f64),
        ("arma_chen_sq_err", |d| d.chen),
        ("arma_prvb_sq_err", |d| d.prvb),
    ] {
        let series: Vec<f64> = days.iter().map(pick).collect();
        let f = fit(&series, theta_star.p, theta_star.q, opts)?;
        let next = forecast(&f.theta_hat, &series, RecursionInit::sample_mean(&series))?;
        out.insert(name.to_string(), vec![(next - h_next).powi(2)]);
    }
    Ok(out)
}

fn run_replication(spec: &McStudySpec, weights: &[WeightConstants], theta_star: &DrBetaParams, rep: u64) -> RepRecord {
    let opts = FitOptions {
        seed: fit_seed(spec.seed, rep),
        ..spec.fit.clone()
    };
    let n_max = *spec.n_grid.iter().max().expect("validated non-empty");
    let mut cells = Vec::with_capacity(spec.m_grid.len() * spec.n_grid.len());
    let true_only = spec.needs_fit() && spec.proxy == Proxy::TrueIntegral && spec.study != StudyKind::MsfeForecast;
    let data = if true_only {
        simulate_beta_truth(&spec.sim_for(n_max), rep).map(|t| {
            let rec = |i: usize| DailyRecord {
                ibeta: t.ibeta[i],
                h: t.h[i],
                rib: t.ibeta[i],
                s_hat: f64::NAN,
                chen: f64::NAN,
                prvb: f64::NAN,
            };
            let days: Vec<DailyRecord> = (0..t.ibeta.len()).map(rec).collect();
            ReplicationData {
                days: vec![days; spec.m_grid.len()],
                h_next: t.h[t.ibeta.len()],
            }
        })
    } else {
        simulate_and_estimate(
            &spec.sim_for(n_max),
            &spec.cfg,
            weights,
            &spec.m_grid,
            rep,
            spec.needs_competitors(),
        )
    };
    for (i, &m) in spec.m_grid.iter().enumerate() {
        for &n in &spec.n_grid {
            let result = data.as_ref().map_err(|e| e.to_string()).and_then(|d| {
                let days = &d.days[i][..n];
                let h_next = if n == n_max { d.h_next } else { d.days[i][n].h };
                let out = match spec.study {
                    StudyKind::EstimatorMse => Ok(estimator_values(days)),
                    StudyKind::CltCoverage => Ok(clt_values(days, m)),
                    StudyKind::ParameterMse | StudyKind::QqNormality => {
                        let series: Vec<f64> = days.iter().map(|d| d.rib).collect();
                        parameter_values(&series, theta_star, &opts)
                    }
                    StudyKind::MsfeForecast => msfe_values(days, h_next, theta_star, &opts),
                };
                let values = out.map_err(|e| e.to_string())?;
                match values.iter().find(|(_, v)| v.iter().any(|x| !x.is_finite())) {
                    Some((key, _)) => Err(format!("non-finite value in {key}")),
                    None => Ok(values),
                }
            });
            cells.push(match result {
                Ok(values) => RepCell {
                    m,
                    n,
                    values,
                    error: None,
                },
                Err(e) => RepCell {
                    m,
                    n,
                    values: BTreeMap::new(),
                    error: Some(e),
                },
            });
        }
    }
    RepRecord { replication: rep, cells }
}

/// Centered sample covariance of the rows of `x`.
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

fn aggregate(spec: &McStudySpec, theta_star: &DrBetaParams, m: usize, n: usize, reps: &[&RepCell]) -> CellReport {
    let ok: Vec<&BTreeMap<String, Vec<f64>>> =
        reps.iter().filter(|c| c.error.is_none()).map(|c| &c.values).collect();
    let mut metrics = BTreeMap::new();
    let mut report = CellReport {
        m,
        n,
        ok: ok.len(),
        failed: reps.len() - ok.len(),
        metrics: BTreeMap::new(),
        error: None,
    };
    if ok.is_empty() {
        report.error = Some(
            reps.iter()
                .find_map(|c| c.error.clone())
                .unwrap_or_else(|| "no replications".into()),
        );
        return report;
    }
    let scalar = |key: &str| finite(ok.iter().filter_map(|v| v.get(key).and_then(|x| x.first().copied())));
    let names = theta_star.names();
    match spec.study {
        StudyKind::EstimatorMse => {
            for key in ["rib_mse", "chen_mse", "prvb_mse", "rib_bias"] {
                metrics.insert(key.to_string(), mean(&scalar(key)));
            }
        }
        StudyKind::CltCoverage => {
            let z: Vec<f64> = ok.iter().flat_map(|v| v["z"].iter().copied()).collect();
            metrics.insert("invalid_days".into(), scalar("invalid_days").iter().sum());
            if !z.is_empty() {
                let inside = z.iter().filter(|v| v.abs() <= 1.959_963_984_540_054).count();
                metrics.insert("coverage_95".into(), inside as f64 / z.len() as f64);
                metrics.insert("z_mean".into(), mean(&z));
                metrics.insert("z_sd".into(), std_dev(&z));
                metrics.insert("count".into(), z.len() as f64);
                if let Ok(ks) = ks_normal(&z) {
                    metrics.insert("ks_normal".into(), ks);
                }
            }
        }
        StudyKind::ParameterMse => {
            let errs: Vec<Vec<f64>> = ok.iter().map(|v| v["theta_err"].clone()).collect();
            let sup: Vec<f64> = errs.iter().map(|e| e.iter().fold(0.0, |a: f64, b| a.max(b.abs()))).collect();
            metrics.insert("mean_sup_err".into(), mean(&sup));
            for (j, name) in names.iter().enumerate() {
                metrics.insert(format!("mse_{name}"), mean(&errs.iter().map(|e| e[j] * e[j]).collect::<Vec<_>>()));
            }
            metrics.insert("converged_share".into(), mean(&scalar("converged")));
            if errs.len() >= 2 {
                let k = names.len();
                let scaled: Vec<Vec<f64>> = errs.iter().map(|e| e.iter().map(|v| v * (n as f64).sqrt()).collect()).collect();
                let emp = sample_cov(&scaled);
                let mut worst: f64 = 0.0;
                let mut worst_diag: f64 = 0.0;
                for i in 0..k {
                    for j in 0..k {
                        let v = mean(&ok.iter().map(|r| r["vhat"][i * k + j]).collect::<Vec<_>>());
                        let rel = (emp[i][j] - v).abs() / v.abs();
                        worst = worst.max(rel);
                        if i == j {
                            worst_diag = worst_diag.max(rel);
                        }
                        metrics.insert(format!("emp_cov_{}_{}", names[i], names[j]), emp[i][j]);
                        metrics.insert(format!("mean_vhat_{}_{}", names[i], names[j]), v);
                    }
                }
                metrics.insert("cov_rel_err_max".into(), worst);
                metrics.insert("cov_rel_err_diag_max".into(), worst_diag);
            }
        }
        StudyKind::QqNormality => {
            let mut ks_max: f64 = 0.0;
            for (j, name) in names.iter().enumerate() {
                let z: Vec<f64> = finite(ok.iter().map(|v| v["z"][j]));
                if let Ok(ks) = ks_normal(&z) {
                    metrics.insert(format!("ks_{name}"), ks);
                    ks_max = ks_max.max(ks);
                }
                let reject = z.iter().filter(|v| v.abs() > 1.959_963_984_540_054).count();
                metrics.insert(format!("size_{name}"), reject as f64 / z.len().max(1) as f64);
            }
            metrics.insert("ks_max".into(), ks_max);
        }
        StudyKind::MsfeForecast => {
            for (key, out) in [
                ("drbeta_sq_err", "msfe_drbeta"),
                ("arma_chen_sq_err", "msfe_arma_chen"),
                ("arma_prvb_sq_err", "msfe_arma_prvb"),
            ] {
                metrics.insert(out.to_string(), mean(&scalar(key)));
            }
        }
    }
    report.metrics = metrics.into_iter().filter(|(_, v)| v.is_finite()).collect();
    report
}

fn read_checkpoint(path: &PathBuf, header: &str) -> Result<BTreeMap<u64, RepRecord>> {
    let mut out = BTreeMap::new();
    let Ok(file) = File::open(path) else {
        return Ok(out);
    };
    let mut lines = BufReader::new(file).lines();
    match lines.next() {
        None => return Ok(out),
        Some(first) => {
            if first? != header {
                return Err(Error::Input(format!(
                    "checkpoint {} belongs to a different study",
                    path.display()
                )));
            }
        }
    }
    for line in lines {
        let line = line?;
        // A torn final line from an interrupted run is simply recomputed.
        if let Ok(rec) = serde_json::from_str::<RepRecord>(&line) {
            out.insert(rec.replication, rec);
        }
    }
    Ok(out)
}

/// Runs `spec` and aggregates every cell.
pub fn run_mc(spec: &McStudySpec, opts: &RunOptions) -> Result<StudyReport> {
    spec.validate()?;
    let weights = weights_for_grid(&spec.cfg, &spec.m_grid)?;
    let tunings = spec.m_grid.iter().map(|&m| spec.cfg.resolve(m)).collect::<Result<Vec<_>>>()?;
    let theta_star = reduced_form(&spec.sim.beta);
    let header = serde_json::to_string(&serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "spec": spec,
    }))?;
    let mut done = match &opts.checkpoint {
        Some(path) => read_checkpoint(path, &header)?,
        None => BTreeMap::new(),
    };
    done.retain(|r, _| *r < spec.replications as u64);
    let mut todo: Vec<u64> = (0..spec.replications as u64).filter(|r| !done.contains_key(r)).collect();
    if let Some(limit) = opts.max_new_replications {
        todo.truncate(limit);
    }
    let writer = match &opts.checkpoint {
        Some(path) => {
            let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
            let mut f = OpenOptions::new().create(true).append(true).open(path)?;
            if fresh {
                writeln!(f, "{header}")?;
            } else {
                // Terminate a torn last line so new records start cleanly.
                writeln!(f)?;
            }
            Some(Mutex::new(f))
        }
        None => None,
    };
    let work = || -> Result<Vec<RepRecord>> {
        todo.par_iter()
            .map(|&rep| {
                let rec = run_replication(spec, &weights, &theta_star, rep);
                if let Some(w) = &writer {
                    let line = serde_json::to_string(&rec)?;
                    let mut f = w.lock().expect("checkpoint writer poisoned");
                    writeln!(f, "{line}")?;
                    f.flush()?;
                }
                Ok(rec)
            })
            .collect()
    };
    let fresh = match opts.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    for rec in fresh {
        done.insert(rec.replication, rec);
    }
    let replications: Vec<RepRecord> = done.into_values().collect();
    let complete = replications.len() == spec.replications;
    let mut cells = Vec::new();
    for &m in &spec.m_grid {
        for &n in &spec.n_grid {
            let reps: Vec<&RepCell> = replications
                .iter()
                .filter_map(|r| r.cells.iter().find(|c| c.m == m && c.n == n))
                .collect();
            cells.push(aggregate(spec, &theta_star, m, n, &reps));
        }
    }
    Ok(StudyReport {
        schema_version: SCHEMA_VERSION,
        manifest: Manifest {
            schema_version: SCHEMA_VERSION,
            tool: "ribeta".into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            spec: spec.clone(),
            tunings,
            theta_star,
        },
        cells,
        replications,
        complete,
    })
}
