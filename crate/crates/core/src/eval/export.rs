//! CSV reports of a backtest.

use std::io::{Read, Write};

use super::backtest::BacktestResult;
use super::dm::{diebold_mariano, DmResult};
use crate::error::{Error, Result};
use crate::models::HORIZON;
use crate::scalar::Scalar;

/// `timestamp,model,forecast,realized`, one row per model and hour.
pub fn write_forecasts<F: Scalar, W: Write>(result: &BacktestResult<F>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["timestamp", "model", "forecast", "realized"])?;
    for run in &result.runs {
        for (i, &t) in result.hours.iter().enumerate() {
            w.write_record([
                result.calendar.format_timestamp(t),
                run.id.clone(),
                format!("{:.4}", run.forecasts[i].as_f64()),
                format!("{:.4}", result.realized[i].as_f64()),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn fmt2(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else {
        format!("{v:.2}")
    }
}

/// Metrics table: benchmark models without externals (panel A) first, then
/// models with externals (panel B).
pub fn write_metrics<F: Scalar, W: Write>(result: &BacktestResult<F>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["panel", "model", "RMSE", "MAE", "Avg. DRMSE", "Avg. WRMSE", "id", "fallback_days"])?;
    for (panel, ext) in [("A", false), ("B", true)] {
        for run in result.runs.iter().filter(|r| r.uses_externals == ext) {
            let m = result.metrics(&run.id)?;
            w.write_record([
                panel.to_string(),
                run.label.clone(),
                fmt2(m.rmse),
                fmt2(m.mae),
                fmt2(m.avg_drmse),
                fmt2(m.avg_wrmse),
                run.id.clone(),
                run.fallback_days.len().to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// DM statistics of every externals model (rows) against every benchmark
/// without externals (columns). A positive statistic means the row model is
/// more accurate.
pub fn dm_matrix<F: Scalar>(result: &BacktestResult<F>) -> Result<Vec<(String, Vec<(String, DmResult)>)>> {
    let rows: Vec<_> = result.runs.iter().filter(|r| r.uses_externals).collect();
    let cols: Vec<_> = result.runs.iter().filter(|r| !r.uses_externals).collect();
    rows.iter()
        .map(|row| {
            let eb = result.errors(&row.id)?;
            let cells = cols
                .iter()
                .map(|col| {
                    let ea = result.errors(&col.id)?;
                    Ok((col.id.clone(), diebold_mariano(&ea, &eb, HORIZON)?))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((row.id.clone(), cells))
        })
        .collect()
}

pub fn write_dm_matrix<F: Scalar, W: Write>(result: &BacktestResult<F>, writer: W) -> Result<()> {
    let matrix = dm_matrix(result)?;
    let mut w = csv::Writer::from_writer(writer);
    let cols: Vec<_> = result.runs.iter().filter(|r| !r.uses_externals).collect();
    let mut header = vec!["model".to_string()];
    for c in &cols {
        header.push(c.id.clone());
        header.push(format!("{} p", c.id));
    }
    w.write_record(&header)?;
    for (row, cells) in &matrix {
        let mut rec = vec![row.clone()];
        for (_, r) in cells {
            rec.push(format!("{:.4}{}", r.statistic, r.stars()));
            rec.push(format!("{:.4}", r.p_value));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// One line of a forecasts file.
#[derive(Clone, Debug, PartialEq, serde::Deserialize)]
pub struct ForecastRow {
    pub timestamp: String,
    pub model: String,
    pub forecast: f64,
    pub realized: f64,
}

pub fn read_forecasts<R: Read>(reader: R) -> Result<Vec<ForecastRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut rows = Vec::new();
    for rec in rdr.deserialize() {
        rows.push(rec?);
    }
    if rows.is_empty() {
        return Err(Error::Empty("forecast file has no rows".into()));
    }
    Ok(rows)
}

/// Rows of `model`, or of the only model present when `model` is `None`.
pub fn select_model<'a>(rows: &'a [ForecastRow], model: Option<&str>) -> Result<Vec<&'a ForecastRow>> {
    let name = match model {
        Some(m) => m.to_string(),
        None => {
            let first = &rows[0].model;
            if rows.iter().any(|r| &r.model != first) {
                return Err(Error::Pair("file holds several models; name one".into()));
            }
            first.clone()
        }
    };
    let out: Vec<_> = rows.iter().filter(|r| r.model == name).collect();
    if out.is_empty() {
        return Err(Error::Pair(format!("no rows for model `{name}`")));
    }
    Ok(out)
}

/// Realized-minus-forecast errors of two series on identical timestamps.
pub fn paired_errors(a: &[&ForecastRow], b: &[&ForecastRow]) -> Result<(Vec<f64>, Vec<f64>)> {
    if a.len() != b.len() {
        return Err(Error::Pair(format!("{} rows against {}", a.len(), b.len())));
    }
    for (x, y) in a.iter().zip(b) {
        if x.timestamp != y.timestamp {
            return Err(Error::Pair(format!("timestamp {} against {}", x.timestamp, y.timestamp)));
        }
    }
    Ok((
        a.iter().map(|r| r.realized - r.forecast).collect(),
        b.iter().map(|r| r.realized - r.forecast).collect(),
    ))
}

/// Hyperparameter choices over the backtest, one row per retuning.
pub fn write_tuning_log<F: Scalar, W: Write>(result: &BacktestResult<F>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["model", "from", "choice", "cv_rmse", "failed_fits"])?;
    for run in &result.runs {
        for rec in &run.tuning {
            w.write_record([
                run.id.clone(),
                result.calendar.format_timestamp(result.evaluation_days[rec.from_day]),
                rec.choice.clone(),
                format!("{:.4}", rec.cv_rmse),
                rec.failed_fits.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
