//! Experiment orchestration: Monte Carlo studies on simulated panels, tick
//! ingestion, rolling forecast evaluation and residual diagnostics.

mod ingest;
mod io;
mod rolling;
mod study;

pub use ingest::{
    ingest_pair, previous_tick_subsample, read_ticks, GridSpec, IngestConfig, IngestOutcome, PriceColumn,
    RawTick, RejectedDay, Subsampled,
};
pub use io::{
    read_estimates_csv, read_panel_csv, read_rib_csv, write_estimates_csv, write_forecasts_csv,
    write_panel_csv, write_rib_csv, write_truth_csv,
};
pub use rolling::{
    estimate_panel, residual_diagnostic, rolling_eval, rolling_eval_table, EstimateRow, EstimateTable,
    Forecaster, ModelEval, ModelInput, RecursionForecaster, ResidualDiagnostic, RollingReport, SkippedDay,
    RESIDUAL_ACF_LAGS,
};
pub use study::{
    run_mc, simulate_and_estimate, weights_for_grid, CellReport, DailyRecord, Manifest, McStudySpec, Proxy,
    RepCell, RepRecord, ReplicationData, RunOptions, StudyKind, StudyReport, SCHEMA_VERSION,
};
