//! Tick CSV ingestion and previous-tick sampling onto a regular day grid.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{DayGrid, DayPanel, Tick, TickSeries};

/// Which price column a tick file carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceColumn {
    /// `timestamp,price`; prices must be positive.
    #[default]
    Price,
    /// `timestamp,log_price`.
    LogPrice,
}

impl PriceColumn {
    fn header(self) -> &'static str {
        match self {
            Self::Price => "price",
            Self::LogPrice => "log_price",
        }
    }
}

/// A tick as read from file, before the day hygiene checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawTick {
    pub timestamp: f64,
    /// Log price, or `None` for a non-positive price.
    pub log_price: Option<f64>,
}

/// Reads a two-column tick CSV with header `timestamp,price` or
/// `timestamp,log_price`. Rows must be in strictly increasing time order.
pub fn read_ticks<R: Read>(reader: R, column: PriceColumn) -> Result<Vec<RawTick>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["timestamp", column.header()];
    if headers.len() != 2 || headers.iter().zip(expected).any(|(a, b)| a != b) {
        return Err(Error::Input(format!(
            "tick header must be `timestamp,{}`, got `{}`",
            column.header(),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out: Vec<RawTick> = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let parse = |j: usize| -> Result<f64> {
            row[j]
                .parse::<f64>()
                .map_err(|e| Error::Input(format!("row {}: column {}: {e}", i + 2, expected[j])))
        };
        let timestamp = parse(0)?;
        let value = parse(1)?;
        if !timestamp.is_finite() || !value.is_finite() {
            return Err(Error::Input(format!("row {} is not finite", i + 2)));
        }
        if let Some(prev) = out.last() {
            if timestamp <= prev.timestamp {
                return Err(Error::Input(format!(
                    "row {}: timestamps must be strictly increasing",
                    i + 2
                )));
            }
        }
        let log_price = match column {
            PriceColumn::Price => (value > 0.0).then(|| value.ln()),
            PriceColumn::LogPrice => Some(value),
        };
        out.push(RawTick { timestamp, log_price });
    }
    Ok(out)
}

/// Regular sampling times of one day: `start + j * spacing`, `j = 0..m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub start: f64,
    pub spacing: f64,
    pub m: usize,
}

impl GridSpec {
    pub fn time(&self, j: usize) -> f64 {
        self.start + j as f64 * self.spacing
    }
}

/// Previous-tick values on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Subsampled {
    pub values: Vec<f64>,
    /// Leading grid points that precede the first tick and carry its value.
    pub leading_fill: usize,
}

/// Samples the last tick at or before each grid time; grid points before the
/// first tick take the first tick's value and are counted as leading fill.
pub fn previous_tick_subsample(ticks: &TickSeries, grid: &GridSpec) -> Result<Subsampled> {
    let t = ticks.ticks();
    if t.is_empty() {
        return Err(Error::Input(format!("asset {} has no ticks", ticks.asset_id())));
    }
    if grid.m == 0 || !(grid.spacing > 0.0) {
        return Err(Error::Config("grid needs m >= 1 and a positive spacing".into()));
    }
    let mut values = Vec::with_capacity(grid.m);
    let mut leading_fill = 0;
    let mut idx = 0usize;
    for j in 0..grid.m {
        let at = grid.time(j);
        while idx + 1 < t.len() && t[idx + 1].timestamp <= at {
            idx += 1;
        }
        if t[idx].timestamp > at {
            leading_fill += 1;
        }
        values.push(t[idx].log_price);
    }
    Ok(Subsampled { values, leading_fill })
}

/// Session layout and hygiene rules for building day grids from ticks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    /// Length of a calendar day in timestamp units.
    pub day_length: f64,
    /// Offset of the first grid time from the start of the calendar day.
    pub session_open: f64,
    pub spacing: f64,
    pub m: usize,
    /// Largest share of leading fill a day may have in either asset.
    pub max_leading_fill: f64,
    pub column: PriceColumn,
}

impl Default for IngestConfig {
    /// One-second sampling of a 9:30 to 16:00 session.
    fn default() -> Self {
        Self {
            day_length: 86_400.0,
            session_open: 34_200.0,
            spacing: 1.0,
            m: 23_400,
            max_leading_fill: 0.2,
            column: PriceColumn::Price,
        }
    }
}

/// A calendar day left out of the panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedDay {
    pub day_key: i64,
    pub reason: String,
}

/// Result of [`ingest_pair`].
#[derive(Debug, Clone, PartialEq)]
pub struct IngestOutcome {
    pub panel: DayPanel,
    /// Calendar day of each panel entry.
    pub day_keys: Vec<i64>,
    pub rejected: Vec<RejectedDay>,
}

fn split_days(ticks: &[RawTick], day_length: f64) -> BTreeMap<i64, Vec<RawTick>> {
    let mut out: BTreeMap<i64, Vec<RawTick>> = BTreeMap::new();
    for t in ticks {
        out.entry((t.timestamp / day_length).floor() as i64).or_default().push(*t);
    }
    out
}

fn day_series(asset: &str, key: i64, ticks: &[RawTick], grid: &GridSpec, cfg: &IngestConfig) -> std::result::Result<Vec<f64>, String> {
    if ticks.iter().any(|t| t.log_price.is_none()) {
        return Err(format!("{asset} has non-positive prices"));
    }
    let series = TickSeries::new(
        format!("{asset}@{key}"),
        ticks
            .iter()
            .map(|t| Tick {
                timestamp: t.timestamp,
                log_price: t.log_price.expect("checked above"),
            })
            .collect(),
    )
    .map_err(|e| e.to_string())?;
    let s = previous_tick_subsample(&series, grid).map_err(|e| e.to_string())?;
    let share = s.leading_fill as f64 / grid.m as f64;
    if share > cfg.max_leading_fill {
        return Err(format!("{asset} leading fill {:.1}% exceeds the limit", 100.0 * share));
    }
    Ok(s.values)
}

/// Builds the paired day panel from market and asset ticks. Days missing in
/// either asset, with non-positive prices or with too much leading fill are
/// reported in `rejected`.
pub fn ingest_pair(market: &[RawTick], asset: &[RawTick], cfg: &IngestConfig) -> Result<IngestOutcome> {
    if !(cfg.day_length > 0.0 && cfg.spacing > 0.0) || cfg.m == 0 {
        return Err(Error::Config("ingest needs a positive day length, spacing and m".into()));
    }
    let d1 = split_days(market, cfg.day_length);
    let d2 = split_days(asset, cfg.day_length);
    let mut keys: Vec<i64> = d1.keys().chain(d2.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    let mut days = Vec::new();
    let mut day_keys = Vec::new();
    let mut rejected = Vec::new();
    for key in keys {
        let (Some(t1), Some(t2)) = (d1.get(&key), d2.get(&key)) else {
            rejected.push(RejectedDay {
                day_key: key,
                reason: "ticks for only one asset".into(),
            });
            continue;
        };
        let grid = GridSpec {
            start: key as f64 * cfg.day_length + cfg.session_open,
            spacing: cfg.spacing,
            m: cfg.m,
        };
        let built = day_series("market", key, t1, &grid, cfg)
            .and_then(|y1| day_series("asset", key, t2, &grid, cfg).map(|y2| (y1, y2)))
            .and_then(|(y1, y2)| DayGrid::new(days.len() + 1, y1, y2).map_err(|e| e.to_string()));
        match built {
            Ok(day) => {
                days.push(day);
                day_keys.push(key);
            }
            Err(reason) => rejected.push(RejectedDay { day_key: key, reason }),
        }
    }
    Ok(IngestOutcome {
        panel: DayPanel::new(days),
        day_keys,
        rejected,
    })
}
