//! CSV readers and writers with fixed column orders.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::rolling::{EstimateRow, EstimateTable, RollingReport};
use crate::simulator::Truth;
use crate::types::{DayGrid, DayPanel, RibEntry, RibSeries};

#[derive(Debug, Serialize, Deserialize)]
struct PanelRow {
    day_index: usize,
    j: usize,
    y1: f64,
    y2: f64,
}

/// `day_index,j,y1,y2` with `j` counting grid points from 1.
pub fn write_panel_csv<W: Write>(panel: &DayPanel, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for day in &panel.days {
        for (j, (a, b)) in day.y1.iter().zip(&day.y2).enumerate() {
            wtr.serialize(PanelRow {
                day_index: day.day_index,
                j: j + 1,
                y1: *a,
                y2: *b,
            })?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Inverse of [`write_panel_csv`]; rows of a day must be contiguous and in
/// grid order.
pub fn read_panel_csv<R: Read>(r: R) -> Result<DayPanel> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut days: Vec<DayGrid> = Vec::new();
    let mut cur: Option<(usize, Vec<f64>, Vec<f64>)> = None;
    for row in rdr.deserialize::<PanelRow>() {
        let row = row?;
        match &mut cur {
            Some((d, y1, y2)) if *d == row.day_index => {
                if row.j != y1.len() + 1 {
                    return Err(Error::Input(format!(
                        "day {d}: expected point {}, found {}",
                        y1.len() + 1,
                        row.j
                    )));
                }
                y1.push(row.y1);
                y2.push(row.y2);
            }
            _ => {
                if let Some((d, y1, y2)) = cur.take() {
                    days.push(DayGrid::new(d, y1, y2)?);
                }
                if row.j != 1 {
                    return Err(Error::Input(format!("day {} does not start at j = 1", row.day_index)));
                }
                cur = Some((row.day_index, vec![row.y1], vec![row.y2]));
            }
        }
    }
    if let Some((d, y1, y2)) = cur {
        days.push(DayGrid::new(d, y1, y2)?);
    }
    Ok(DayPanel::new(days))
}

#[derive(Debug, Serialize)]
struct TruthRow {
    day_index: usize,
    ibeta: f64,
    beta_close: f64,
    h: f64,
}

/// `day_index,ibeta,beta_close,h`.
pub fn write_truth_csv<W: Write>(truth: &Truth, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for (i, ((ib, bc), h)) in truth.ibeta.iter().zip(&truth.beta_close).zip(&truth.h).enumerate() {
        wtr.serialize(TruthRow {
            day_index: i + 1,
            ibeta: *ib,
            beta_close: *bc,
            h: *h,
        })?;
    }
    wtr.flush()?;
    Ok(())
}

/// Long layout `day_index,rib,s_hat,ci_low,ci_high,estimator` with one row
/// per day and estimator (`rib`, `chen`, `prvb`). The `rib` column holds the
/// estimate of the row's estimator; the variance and interval columns are
/// empty for the competitors.
pub fn write_estimates_csv<W: Write>(table: &EstimateTable, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["day_index", "rib", "s_hat", "ci_low", "ci_high", "estimator"])?;
    for row in &table.rows {
        let day = row.day_index.to_string();
        wtr.write_record([
            day.as_str(),
            &row.rib.to_string(),
            &row.s_hat.to_string(),
            &row.ci_low.to_string(),
            &row.ci_high.to_string(),
            "rib",
        ])?;
        wtr.write_record([day.as_str(), &row.chen.to_string(), "", "", "", "chen"])?;
        wtr.write_record([day.as_str(), &row.prvb.to_string(), "", "", "", "prvb"])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct LongRow {
    day_index: usize,
    rib: f64,
    s_hat: Option<f64>,
    ci_low: Option<f64>,
    ci_high: Option<f64>,
    estimator: String,
}

/// Inverse of [`write_estimates_csv`]; every day needs all three estimators.
/// The spot count is not stored and reads back as zero.
pub fn read_estimates_csv<R: Read>(r: R) -> Result<EstimateTable> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut days: BTreeMap<usize, [Option<LongRow>; 3]> = BTreeMap::new();
    for row in rdr.deserialize::<LongRow>() {
        let row = row?;
        let slot = match row.estimator.as_str() {
            "rib" => 0,
            "chen" => 1,
            "prvb" => 2,
            other => return Err(Error::Input(format!("day {}: unknown estimator `{other}`", row.day_index))),
        };
        let entry = days.entry(row.day_index).or_default();
        if entry[slot].is_some() {
            return Err(Error::Input(format!("day {}: duplicate {} row", row.day_index, row.estimator)));
        }
        entry[slot] = Some(row);
    }
    let rows = days
        .into_iter()
        .map(|(day_index, [rib, chen, prvb])| {
            let (Some(rib), Some(chen), Some(prvb)) = (rib, chen, prvb) else {
                return Err(Error::Input(format!("day {day_index} lacks one of rib, chen, prvb")));
            };
            Ok(EstimateRow {
                day_index,
                rib: rib.rib,
                s_hat: rib.s_hat.unwrap_or(f64::NAN),
                ci_low: rib.ci_low.unwrap_or(f64::NAN),
                ci_high: rib.ci_high.unwrap_or(f64::NAN),
                chen: chen.rib,
                prvb: prvb.rib,
                n_spots: 0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimateTable {
        rows,
        ..Default::default()
    })
}

/// `day_index,rib,s_hat,n_spots`.
pub fn write_rib_csv<W: Write>(series: &RibSeries, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for row in &series.days {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads any CSV with `day_index` and `rib` columns (extra columns are
/// ignored; `s_hat` and `n_spots` default to zero when absent). With an
/// `estimator` column only the `rib` rows are read. Days must be strictly
/// increasing.
pub fn read_rib_csv<R: Read>(r: R) -> Result<RibSeries> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(di), Some(ri)) = (col("day_index"), col("rib")) else {
        return Err(Error::Input("RIB file needs `day_index` and `rib` columns".into()));
    };
    let (si, ni, ei) = (col("s_hat"), col("n_spots"), col("estimator"));
    let mut days: Vec<RibEntry> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if ei.is_some_and(|i| rec[i].trim() != "rib") {
            continue;
        }
        let bad = |what: &str| Error::Input(format!("row {}: bad {what}", line + 2));
        let day_index: usize = rec[di].trim().parse().map_err(|_| bad("day_index"))?;
        let rib: f64 = rec[ri].trim().parse().map_err(|_| bad("rib"))?;
        let s_hat = match si {
            Some(i) => rec[i].trim().parse().map_err(|_| bad("s_hat"))?,
            None => 0.0,
        };
        let n_spots = match ni {
            Some(i) => rec[i].trim().parse().map_err(|_| bad("n_spots"))?,
            None => 0,
        };
        if !rib.is_finite() {
            return Err(bad("rib (not finite)"));
        }
        if days.last().is_some_and(|d| d.day_index >= day_index) {
            return Err(Error::Input(format!("row {}: days must be increasing", line + 2)));
        }
        days.push(RibEntry {
            day_index,
            rib,
            s_hat,
            n_spots,
        });
    }
    Ok(RibSeries { days })
}

/// `day_index,target,<model>...` with one column per model in report order.
pub fn write_forecasts_csv<W: Write>(report: &RollingReport, day_indices: &[usize], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["day_index".to_string(), "target".to_string()];
    header.extend(report.models.iter().map(|m| m.name.clone()));
    wtr.write_record(&header)?;
    for (k, &pos) in report.eval_positions.iter().enumerate() {
        let day = day_indices.get(pos).copied().unwrap_or(pos + 1);
        let mut rec = vec![day.to_string(), report.targets[k].to_string()];
        rec.extend(report.models.iter().map(|m| m.forecasts[k].to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}
