//! Daily estimation of a price panel, rolling-window forecast evaluation and
//! forecast-residual diagnostics.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{acf, chen_from_context, prvb_from_context, rib_from_context, DayContext};
use crate::model::{fit, forecast, DrBetaParams, FitOptions, RecursionInit};
use crate::stats::{mean, ols};
use crate::types::{DayPanel, Diagnostics, PreAvgConfig, RibEntry, RibSeries};
use crate::weights::{weight_constants, WeightConstants};

/// Daily RIB with both competitors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub day_index: usize,
    pub rib: f64,
    pub s_hat: f64,
    /// 95% interval `rib -/+ 1.96 sqrt(s_hat) / m^(1/4)`.
    pub ci_low: f64,
    pub ci_high: f64,
    pub chen: f64,
    pub prvb: f64,
    pub n_spots: usize,
}

/// A day the estimators could not handle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedDay {
    pub day_index: usize,
    pub reason: String,
}

/// Per-day estimates of a panel.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimateTable {
    pub rows: Vec<EstimateRow>,
    pub skipped: Vec<SkippedDay>,
    pub diagnostics: Diagnostics,
}

impl EstimateTable {
    pub fn rib_series(&self) -> RibSeries {
        RibSeries {
            days: self
                .rows
                .iter()
                .map(|r| RibEntry {
                    day_index: r.day_index,
                    rib: r.rib,
                    s_hat: r.s_hat,
                    n_spots: r.n_spots,
                })
                .collect(),
        }
    }

    pub fn column(&self, pick: fn(&EstimateRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(pick).collect()
    }
}

const Z_95: f64 = 1.959_963_984_540_054;

/// Estimates RIB, CHEN and PRVB for every day of `panel`, in parallel over
/// days. Days that fail are listed in `skipped`.
pub fn estimate_panel(panel: &DayPanel, cfg: &PreAvgConfig) -> Result<EstimateTable> {
    cfg.validate()?;
    let mut weights: BTreeMap<usize, std::result::Result<WeightConstants, String>> = BTreeMap::new();
    for day in &panel.days {
        weights
            .entry(day.m())
            .or_insert_with(|| weight_constants(cfg, day.m()).map_err(|e| e.to_string()));
    }
    let results: Vec<std::result::Result<(EstimateRow, Diagnostics), SkippedDay>> = panel
        .days
        .par_iter()
        .map(|day| {
            let skip = |reason: String| SkippedDay {
                day_index: day.day_index,
                reason,
            };
            let wc = weights[&day.m()].as_ref().map_err(|e| skip(e.clone()))?;
            let run = || -> Result<(EstimateRow, Diagnostics)> {
                let ctx = DayContext::new(day, cfg, wc)?;
                let est = rib_from_context(&ctx, day.day_index)?;
                let half = Z_95 * est.s_hat.sqrt() / (day.m() as f64).powf(0.25);
                Ok((
                    EstimateRow {
                        day_index: day.day_index,
                        rib: est.rib,
                        s_hat: est.s_hat,
                        ci_low: est.rib - half,
                        ci_high: est.rib + half,
                        chen: chen_from_context(&ctx)?,
                        prvb: prvb_from_context(&ctx)?,
                        n_spots: est.spots.len(),
                    },
                    est.diagnostics,
                ))
            };
            run().map_err(|e| skip(e.to_string()))
        })
        .collect();
    let mut table = EstimateTable::default();
    for r in results {
        match r {
            Ok((row, diag)) => {
                table.diagnostics.merge(&diag);
                table.rows.push(row);
            }
            Err(s) => table.skipped.push(s),
        }
    }
    Ok(table)
}

/// A one-day-ahead forecaster refitted on each rolling window.
pub trait Forecaster {
    fn name(&self) -> String;
    /// Forecast for the day after `window`, where `window` holds the model's
    /// input series over the preceding days.
    fn forecast(&mut self, window: &[f64]) -> Result<f64>;
    /// Windows on which the forecaster had to fall back to earlier state.
    fn fallbacks(&self) -> usize {
        0
    }
}

/// The DR Beta recursion refitted on every window. When a fit fails, the
/// previous parameters are reused.
#[derive(Debug, Clone)]
pub struct RecursionForecaster {
    pub label: String,
    pub p: usize,
    pub q: usize,
    pub opts: FitOptions,
    last: Option<DrBetaParams>,
    fallbacks: usize,
    /// Messages of the failed fits.
    pub failures: Vec<String>,
}

impl RecursionForecaster {
    pub fn new(label: impl Into<String>, p: usize, q: usize, opts: FitOptions) -> Self {
        Self {
            label: label.into(),
            p,
            q,
            opts,
            last: None,
            fallbacks: 0,
            failures: Vec::new(),
        }
    }
}

impl Forecaster for RecursionForecaster {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn forecast(&mut self, window: &[f64]) -> Result<f64> {
        let theta = match fit(window, self.p, self.q, &self.opts) {
            Ok(f) => {
                self.last = Some(f.theta_hat.clone());
                f.theta_hat
            }
            Err(e) => {
                self.failures.push(e.to_string());
                self.fallbacks += 1;
                self.last.clone().ok_or(e)?
            }
        };
        forecast(&theta, window, RecursionInit::sample_mean(window))
    }

    fn fallbacks(&self) -> usize {
        self.fallbacks
    }
}

/// A forecaster together with the series it reads.
pub struct ModelInput<'a> {
    pub input: &'a [f64],
    pub model: Box<dyn Forecaster + 'a>,
}

/// Forecasts and accuracy of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEval {
    pub name: String,
    pub forecasts: Vec<f64>,
    /// Mean absolute error against the target.
    pub mape: f64,
    pub fallbacks: usize,
}

/// Result of [`rolling_eval`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingReport {
    pub window: usize,
    /// Positions of the evaluated days in the target series.
    pub eval_positions: Vec<usize>,
    pub targets: Vec<f64>,
    pub models: Vec<ModelEval>,
}

/// For each day `i >= window`, every model forecasts `target[i]` from its
/// input over days `i - window .. i`; the mean absolute error is reported per
/// model.
pub fn rolling_eval(target: &[f64], models: Vec<ModelInput<'_>>, window: usize) -> Result<RollingReport> {
    if window == 0 || target.len() <= window {
        return Err(Error::Input(format!(
            "rolling evaluation needs more than {window} days, got {}",
            target.len()
        )));
    }
    if let Some(m) = models.iter().find(|m| m.input.len() != target.len()) {
        return Err(Error::Input(format!(
            "model {} reads {} days but the target has {}",
            m.model.name(),
            m.input.len(),
            target.len()
        )));
    }
    let positions: Vec<usize> = (window..target.len()).collect();
    let targets: Vec<f64> = positions.iter().map(|&i| target[i]).collect();
    let mut evals = Vec::with_capacity(models.len());
    for mut m in models {
        let forecasts = positions
            .iter()
            .map(|&i| m.model.forecast(&m.input[i - window..i]))
            .collect::<Result<Vec<f64>>>()?;
        let mape = mean(&forecasts.iter().zip(&targets).map(|(f, t)| (f - t).abs()).collect::<Vec<_>>());
        evals.push(ModelEval {
            name: m.model.name(),
            forecasts,
            mape,
            fallbacks: m.model.fallbacks(),
        });
    }
    Ok(RollingReport {
        window,
        eval_positions: positions,
        targets,
        models: evals,
    })
}

/// DR Beta on RIB against the same recursion fitted to CHEN and to PRVB,
/// all evaluated against RIB.
pub fn rolling_eval_table(table: &EstimateTable, window: usize, p: usize, q: usize, opts: &FitOptions) -> Result<RollingReport> {
    let rib = table.column(|r| r.rib);
    let chen = table.column(|r| r.chen);
    let prvb = table.column(|r| r.prvb);
    let model = |name: &str| Box::new(RecursionForecaster::new(name, p, q, opts.clone()));
    rolling_eval(
        &rib,
        vec![
            ModelInput {
                input: &rib,
                model: model("drbeta"),
            },
            ModelInput {
                input: &chen,
                model: model("arma_chen"),
            },
            ModelInput {
                input: &prvb,
                model: model("arma_prvb"),
            },
        ],
        window,
    )
}

/// Regression of realized values on forecasts with the residual ACF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualDiagnostic {
    pub intercept: f64,
    pub slope: f64,
    /// Lags `0..=20`.
    pub residual_acf: Vec<f64>,
}

/// Maximum residual ACF lag.
pub const RESIDUAL_ACF_LAGS: usize = 20;

/// Least squares of `rib` on `forecasts` and the residual autocorrelations.
pub fn residual_diagnostic(rib: &[f64], forecasts: &[f64]) -> Result<ResidualDiagnostic> {
    if rib.len() != forecasts.len() || rib.len() < 30 {
        return Err(Error::Input(format!(
            "residual diagnostics need two equal series of at least 30 points, got {} and {}",
            rib.len(),
            forecasts.len()
        )));
    }
    let (intercept, slope, resid) = ols(rib, forecasts)?;
    let residual_acf = acf(&resid, RESIDUAL_ACF_LAGS)?;
    Ok(ResidualDiagnostic {
        intercept,
        slope,
        residual_acf,
    })
}
