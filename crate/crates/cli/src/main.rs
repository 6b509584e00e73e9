//! `ribeta`: simulate panels, estimate daily integrated betas, fit and
//! forecast the DR Beta recursion, run Monte Carlo studies and ingest tick
//! data.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use ribeta_core::harness::{
    estimate_panel, ingest_pair, read_estimates_csv, read_panel_csv, read_rib_csv, read_ticks,
    residual_diagnostic, rolling_eval, rolling_eval_table, run_mc, write_estimates_csv,
    write_forecasts_csv, write_panel_csv, write_truth_csv, IngestConfig, McStudySpec, ModelInput,
    PriceColumn, RecursionForecaster, RunOptions, SCHEMA_VERSION,
};
use ribeta_core::model::{bic_select, fit, forecast, DrBetaFit, FitOptions, RecursionInit};
use ribeta_core::simulator::{simulate_replication, SimConfig};
use ribeta_core::stats::two_sided_p;
use ribeta_core::types::PreAvgConfig;

#[derive(Parser, Debug)]
#[command(name = "ribeta", version, about = "Robust realized integrated beta toolkit")]
struct Cli {
    /// TOML file with optional [sim], [preavg], [fit], [model], [ingest] and
    /// [study] tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed of the simulation or study.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory receiving every output file.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Worker threads (defaults to one per core). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a price panel with its ground truth.
    Simulate(SimulateArgs),
    /// Estimate RIB, CHEN and PRVB for every day of a panel.
    Estimate(EstimateArgs),
    /// Fit the DR Beta recursion to a daily series.
    Fit(FitArgs),
    /// One-step and rolling forecasts with accuracy diagnostics.
    Forecast(ForecastArgs),
    /// Run the Monte Carlo study described by the [study] table.
    McStudy(McStudyArgs),
    /// Build a paired day panel from market and asset tick files.
    Ingest(IngestArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Number of days (overrides the config).
    #[arg(long)]
    days: Option<usize>,
    /// Grid points per day (overrides the config).
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 0)]
    replication: u64,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    /// Panel CSV `day_index,j,y1,y2`.
    #[arg(long)]
    panel: PathBuf,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// CSV with `day_index` and `rib` columns.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    q: Option<usize>,
    /// Select the order by BIC over `p <= p_max`, `q <= q_max`.
    #[arg(long)]
    bic: bool,
}

#[derive(Args, Debug)]
struct ForecastArgs {
    /// Estimates CSV from `estimate` (the competitors are then evaluated
    /// too) or any CSV with `day_index` and `rib` columns.
    #[arg(long)]
    input: PathBuf,
    /// Rolling window length; without it only the next-day forecast is made.
    #[arg(long)]
    window: Option<usize>,
}

#[derive(Args, Debug)]
struct McStudyArgs {
    /// JSONL checkpoint; finished replications found there are reused.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Stop after this many new replications.
    #[arg(long)]
    max_new: Option<usize>,
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[arg(long)]
    market: PathBuf,
    #[arg(long)]
    asset: PathBuf,
    /// Tick files carry `timestamp,log_price` instead of `timestamp,price`.
    #[arg(long)]
    log_price: bool,
}

/// Orders used by `fit` and `forecast`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ModelConfig {
    p: usize,
    q: usize,
    p_max: usize,
    q_max: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            p: 1,
            q: 1,
            p_max: 2,
            q_max: 2,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    sim: SimConfig,
    preavg: PreAvgConfig,
    fit: FitOptions,
    model: ModelConfig,
    ingest: IngestConfig,
    study: Option<McStudySpec>,
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<()> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn fit_json(f: &DrBetaFit) -> serde_json::Value {
    let names = f.theta_hat.names();
    let values = f.theta_hat.to_vec();
    let params: Vec<serde_json::Value> = names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            json!({
                "name": name,
                "estimate": values[i],
                "std_error": f.std_errors[i],
                "z": f.z_stats[i],
                "p_value": two_sided_p(f.z_stats[i]),
            })
        })
        .collect();
    json!({
        "p": f.theta_hat.p,
        "q": f.theta_hat.q,
        "n_obs": f.n_obs,
        "loss": f.loss,
        "bic": f.bic,
        "converged": f.converged,
        "iterations": f.iterations,
        "parameters": params,
        "vhat": f.vhat,
        "init": f.init,
    })
}

fn simulate_cmd(cli: &Cli, cfg: RunConfig, args: &SimulateArgs) -> Result<()> {
    let mut sim = cfg.sim;
    if let Some(n) = args.days {
        sim.n_days = n;
    }
    if let Some(m) = args.m {
        sim.m_per_day = m;
    }
    if let Some(seed) = cli.seed {
        sim.seed = seed;
    }
    sim.keep_latent = false;
    let out = simulate_replication(&sim, args.replication)?;
    write_panel_csv(&out.panel, create(&cli.out_dir, "panel.csv")?)?;
    write_truth_csv(&out.truth, create(&cli.out_dir, "truth.csv")?)?;
    write_json(
        &cli.out_dir,
        "simulate.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "replication": args.replication,
            "sim": sim,
            "diagnostics": out.diagnostics,
        }),
    )?;
    eprintln!("simulated {} days of {} points", sim.n_days, sim.m_per_day);
    Ok(())
}

fn estimate_cmd(cli: &Cli, cfg: RunConfig, args: &EstimateArgs) -> Result<()> {
    let panel = read_panel_csv(open(&args.panel)?)?;
    let table = estimate_panel(&panel, &cfg.preavg)?;
    write_estimates_csv(&table, create(&cli.out_dir, "estimates.csv")?)?;
    write_json(
        &cli.out_dir,
        "estimate_report.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "preavg": cfg.preavg,
            "days": table.rows.len(),
            "skipped": table.skipped,
            "diagnostics": table.diagnostics,
        }),
    )?;
    eprintln!("estimated {} days, skipped {}", table.rows.len(), table.skipped.len());
    Ok(())
}

fn fit_cmd(cli: &Cli, cfg: RunConfig, args: &FitArgs) -> Result<()> {
    let rib = read_rib_csv(open(&args.input)?)?.values();
    let mut opts = cfg.fit;
    if let Some(seed) = cli.seed {
        opts.seed = seed;
    }
    let report = if args.bic {
        let sel = bic_select(&rib, cfg.model.p_max, cfg.model.q_max, &opts)?;
        let grid: Vec<serde_json::Value> = sel
            .fits
            .iter()
            .map(|c| match &c.fit {
                Ok(f) => json!({"p": c.p, "q": c.q, "bic": f.bic, "loss": f.loss}),
                Err(e) => json!({"p": c.p, "q": c.q, "error": e}),
            })
            .collect();
        json!({"schema_version": SCHEMA_VERSION, "fit": opts, "selected": fit_json(sel.selected()), "bic_grid": grid})
    } else {
        let (p, q) = (args.p.unwrap_or(cfg.model.p), args.q.unwrap_or(cfg.model.q));
        json!({"schema_version": SCHEMA_VERSION, "fit": opts, "selected": fit_json(&fit(&rib, p, q, &opts)?)})
    };
    write_json(&cli.out_dir, "fit.json", &report)?;
    eprintln!(
        "fitted order ({}, {}) on {} days",
        report["selected"]["p"], report["selected"]["q"], rib.len()
    );
    Ok(())
}

fn forecast_cmd(cli: &Cli, cfg: RunConfig, args: &ForecastArgs) -> Result<()> {
    let mut text = String::new();
    open(&args.input)?.read_to_string(&mut text)?;
    let header = text.lines().next().unwrap_or_default();
    let has_competitors = header.split(',').any(|h| h.trim() == "estimator");
    let series = read_rib_csv(text.as_bytes())?;
    let rib = series.values();
    let days: Vec<usize> = series.days.iter().map(|d| d.day_index).collect();
    let (p, q) = (cfg.model.p, cfg.model.q);
    let mut opts = cfg.fit;
    if let Some(seed) = cli.seed {
        opts.seed = seed;
    }

    let full = fit(&rib, p, q, &opts)?;
    let next = forecast(&full.theta_hat, &rib, RecursionInit::sample_mean(&rib))?;
    let mut report = json!({
        "schema_version": SCHEMA_VERSION,
        "fit": opts,
        "p": p,
        "q": q,
        "next_day": days.last().map_or(1, |d| d + 1),
        "next_day_forecast": next,
    });

    if let Some(window) = args.window {
        let rolling = if has_competitors {
            let table = read_estimates_csv(text.as_bytes())?;
            rolling_eval_table(&table, window, p, q, &opts)?
        } else {
            let model = Box::new(RecursionForecaster::new("drbeta", p, q, opts.clone()));
            rolling_eval(&rib, vec![ModelInput { input: &rib, model }], window)?
        };
        write_forecasts_csv(&rolling, &days, create(&cli.out_dir, "forecasts.csv")?)?;
        let diag = residual_diagnostic(&rolling.targets, &rolling.models[0].forecasts).ok();
        report["window"] = json!(window);
        report["models"] = json!(rolling
            .models
            .iter()
            .map(|m| json!({"name": m.name, "mape": m.mape, "fallbacks": m.fallbacks}))
            .collect::<Vec<_>>());
        report["residual_diagnostic"] = json!(diag);
    }
    write_json(&cli.out_dir, "forecast_report.json", &report)?;
    eprintln!("next-day forecast {next:.6}");
    Ok(())
}

fn mc_study_cmd(cli: &Cli, cfg: RunConfig, args: &McStudyArgs) -> Result<()> {
    let Some(mut spec) = cfg.study else {
        bail!("mc-study needs a [study] table in the config file");
    };
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    let opts = RunOptions {
        threads: cli.threads,
        checkpoint: args.checkpoint.clone(),
        max_new_replications: args.max_new,
    };
    let report = run_mc(&spec, &opts)?;
    let path = cli.out_dir.join("mc_report.json");
    fs::write(&path, report.to_json()? + "\n").with_context(|| format!("writing {}", path.display()))?;
    eprintln!(
        "{} of {} replications done{}",
        report.replications.len(),
        spec.replications,
        if report.complete { "" } else { " (partial)" }
    );
    Ok(())
}

fn ingest_cmd(cli: &Cli, cfg: RunConfig, args: &IngestArgs) -> Result<()> {
    let mut ingest = cfg.ingest;
    if args.log_price {
        ingest.column = PriceColumn::LogPrice;
    }
    let market = read_ticks(open(&args.market)?, ingest.column)?;
    let asset = read_ticks(open(&args.asset)?, ingest.column)?;
    let out = ingest_pair(&market, &asset, &ingest)?;
    write_panel_csv(&out.panel, create(&cli.out_dir, "panel.csv")?)?;
    write_json(
        &cli.out_dir,
        "ingest_report.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "ingest": ingest,
            "day_keys": out.day_keys,
            "rejected": out.rejected,
        }),
    )?;
    eprintln!("kept {} days, rejected {}", out.panel.days.len(), out.rejected.len());
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let cfg = load_config(cli.config.as_deref())?;
    fs::create_dir_all(&cli.out_dir).with_context(|| format!("creating {}", cli.out_dir.display()))?;
    match &cli.command {
        Command::Simulate(a) => simulate_cmd(&cli, cfg, a),
        Command::Estimate(a) => estimate_cmd(&cli, cfg, a),
        Command::Fit(a) => fit_cmd(&cli, cfg, a),
        Command::Forecast(a) => forecast_cmd(&cli, cfg, a),
        Command::McStudy(a) => mc_study_cmd(&cli, cfg, a),
        Command::Ingest(a) => ingest_cmd(&cli, cfg, a),
    }
}
