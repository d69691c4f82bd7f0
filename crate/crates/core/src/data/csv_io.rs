//! CSV ingestion and export of hourly panels.
//!
//! Layout: a header row, a `timestamp` column (ISO-8601; naive values are
//! read as UTC), the `price` column, then predictor columns. Daily columns
//! need a value on at least one row of each trading day; that value is
//! repeated over the day's 24 hours and days without one (weekends,
//! holidays) carry the last trading day's value forward.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Timelike, Utc};
use serde::{Deserialize, Serialize};

use super::calendar::HourlyCalendar;
use super::panel::{Frequency, HourlyPanel, PredictorColumn};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Role of one predictor column in the source file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnRole {
    pub name: String,
    /// Source column header; defaults to `name`.
    #[serde(default)]
    pub column: Option<String>,
    #[serde(default)]
    pub frequency: Frequency,
}

impl ColumnRole {
    pub fn hourly(name: &str) -> Self {
        Self {
            name: name.into(),
            column: None,
            frequency: Frequency::Hourly,
        }
    }

    pub fn daily(name: &str) -> Self {
        Self {
            name: name.into(),
            column: None,
            frequency: Frequency::Daily,
        }
    }

    fn source(&self) -> &str {
        self.column.as_deref().unwrap_or(&self.name)
    }
}

/// Column-role mapping for [`ingest_csv`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    #[serde(default = "default_timestamp")]
    pub timestamp: String,
    #[serde(default = "default_price")]
    pub price: String,
    #[serde(default)]
    pub predictors: Vec<ColumnRole>,
    #[serde(default = "default_market")]
    pub market_label: String,
    /// Maximum number of consecutive missing hourly cells that may be
    /// forward-filled. Zero makes every missing cell an error.
    #[serde(default)]
    pub ffill_limit: usize,
}

fn default_timestamp() -> String {
    "timestamp".into()
}
fn default_price() -> String {
    "price".into()
}
fn default_market() -> String {
    "day-ahead".into()
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            timestamp: default_timestamp(),
            price: default_price(),
            predictors: Vec::new(),
            market_label: default_market(),
            ffill_limit: 0,
        }
    }
}

pub fn parse_timestamp(s: &str) -> std::result::Result<DateTime<Utc>, String> {
    let s = s.trim();
    let ts = if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        dt.with_timezone(&Utc)
    } else {
        const FORMATS: [&str; 4] = [
            "%Y-%m-%dT%H:%M:%S",
            "%Y-%m-%dT%H:%M",
            "%Y-%m-%d %H:%M:%S",
            "%Y-%m-%d %H:%M",
        ];
        FORMATS
            .iter()
            .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
            .map(|n| n.and_utc())
            .ok_or_else(|| format!("`{s}` is not an ISO-8601 timestamp"))?
    };
    if ts.minute() != 0 || ts.second() != 0 || ts.nanosecond() != 0 {
        return Err(format!("`{s}` is not aligned to a full hour"));
    }
    Ok(ts)
}

pub fn ingest_csv<F: Scalar>(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<HourlyPanel<F>> {
    let file = std::fs::File::open(path.as_ref())?;
    ingest_reader(file, schema)
}

struct RawRow<F> {
    line: usize,
    ts: DateTime<Utc>,
    price: Option<F>,
    cells: Vec<Option<F>>,
}

pub fn ingest_reader<F: Scalar, R: Read>(reader: R, schema: &CsvSchema) -> Result<HourlyPanel<F>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let find = |name: &str| {
        index
            .get(name)
            .copied()
            .ok_or_else(|| Error::Schema(format!("column `{name}` not found in header")))
    };
    let ts_col = find(&schema.timestamp)?;
    let price_col = find(&schema.price)?;
    let pred_cols = schema
        .predictors
        .iter()
        .map(|r| find(r.source()))
        .collect::<Result<Vec<_>>>()?;

    let parse_cell = |raw: &str, line: usize, column: &str| -> Result<Option<F>> {
        if raw.is_empty() || raw.eq_ignore_ascii_case("na") || raw.eq_ignore_ascii_case("nan") {
            return Ok(None);
        }
        raw.parse::<F>()
            .map(Some)
            .map_err(|_| Error::Parse {
                row: line,
                column: column.to_string(),
                message: format!("`{raw}` is not a number"),
            })
    };

    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        // header is line 1
        let line = i + 2;
        let ts = parse_timestamp(rec.get(ts_col).unwrap_or("")).map_err(|message| Error::Parse {
            row: line,
            column: schema.timestamp.clone(),
            message,
        })?;
        let price = parse_cell(rec.get(price_col).unwrap_or(""), line, &schema.price)?;
        let cells = pred_cols
            .iter()
            .zip(&schema.predictors)
            .map(|(&c, role)| parse_cell(rec.get(c).unwrap_or(""), line, role.source()))
            .collect::<Result<Vec<_>>>()?;
        rows.push(RawRow {
            line,
            ts,
            price,
            cells,
        });
    }
    if rows.is_empty() {
        return Err(Error::Empty("csv file has no data rows".into()));
    }
    rows.sort_by_key(|r| r.ts);
    for w in rows.windows(2) {
        let step = (w[1].ts - w[0].ts).num_seconds();
        if step == 0 {
            return Err(Error::Duplicate {
                timestamp: w[1].ts.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
            });
        }
        if step != 3600 {
            let missing = w[0].ts + chrono::Duration::hours(1);
            return Err(Error::Gap {
                first_missing: missing.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
            });
        }
    }

    let lines: Vec<usize> = rows.iter().map(|r| r.line).collect();
    let price = fill_hourly(
        rows.iter().map(|r| r.price).collect(),
        &lines,
        &schema.price,
        schema.ffill_limit,
    )?;
    let dates: Vec<NaiveDate> = rows.iter().map(|r| r.ts.date_naive()).collect();
    let mut predictors = Vec::with_capacity(schema.predictors.len());
    for (k, role) in schema.predictors.iter().enumerate() {
        let raw: Vec<Option<F>> = rows.iter().map(|r| r.cells[k]).collect();
        let values = match role.frequency {
            Frequency::Hourly => fill_hourly(raw, &lines, role.source(), schema.ffill_limit)?,
            Frequency::Daily => align_daily(raw, &dates, &lines, role.source())?,
        };
        predictors.push(PredictorColumn {
            name: role.name.clone(),
            frequency: role.frequency,
            values,
        });
    }
    let calendar = HourlyCalendar::new(rows[0].ts, rows.len());
    HourlyPanel::new(calendar, price, predictors, schema.market_label.clone())
}

fn fill_hourly<F: Scalar>(raw: Vec<Option<F>>, lines: &[usize], column: &str, limit: usize) -> Result<Vec<F>> {
    let mut out = Vec::with_capacity(raw.len());
    let mut last: Option<F> = None;
    let mut run = 0usize;
    for (i, v) in raw.into_iter().enumerate() {
        match v {
            Some(x) => {
                last = Some(x);
                run = 0;
                out.push(x);
            }
            None => {
                run += 1;
                match last {
                    Some(x) if run <= limit => out.push(x),
                    _ => {
                        return Err(Error::Missing {
                            row: lines[i],
                            column: column.to_string(),
                        })
                    }
                }
            }
        }
    }
    Ok(out)
}

fn align_daily<F: Scalar>(raw: Vec<Option<F>>, dates: &[NaiveDate], lines: &[usize], column: &str) -> Result<Vec<F>> {
    let mut out = vec![F::zero(); raw.len()];
    let mut last: Option<F> = None;
    let mut i = 0;
    while i < raw.len() {
        let mut j = i;
        while j < raw.len() && dates[j] == dates[i] {
            j += 1;
        }
        let value = raw[i..j].iter().flatten().next().copied().or(last).ok_or_else(|| Error::Missing {
            row: lines[i],
            column: column.to_string(),
        })?;
        out[i..j].iter_mut().for_each(|v| *v = value);
        last = Some(value);
        i = j;
    }
    Ok(out)
}

/// Writes a panel in the ingestible layout. With `precision = None` every
/// number uses the shortest representation that parses back to the same
/// value, so ingestion of the written file reproduces the panel exactly.
pub fn write_csv<F: Scalar, W: Write>(panel: &HourlyPanel<F>, writer: W, precision: Option<usize>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["timestamp".to_string(), "price".to_string()];
    header.extend(panel.predictor_names());
    w.write_record(&header)?;
    let fmt = |v: F| match precision {
        Some(p) => format!("{v:.p$}"),
        None => format!("{v}"),
    };
    for t in 0..panel.len() {
        let mut rec = Vec::with_capacity(header.len());
        rec.push(panel.calendar().format_timestamp(t));
        rec.push(fmt(panel.price()[t]));
        for c in panel.predictors() {
            rec.push(fmt(c.values[t]));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Schema that reads back a panel written by [`write_csv`].
pub fn schema_for<F: Scalar>(panel: &HourlyPanel<F>) -> CsvSchema {
    CsvSchema {
        predictors: panel
            .predictors()
            .iter()
            .map(|c| ColumnRole {
                name: c.name.clone(),
                column: None,
                frequency: c.frequency,
            })
            .collect(),
        market_label: panel.market_label().to_string(),
        ..CsvSchema::default()
    }
}
