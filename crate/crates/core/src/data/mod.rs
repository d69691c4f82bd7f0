//! Calendar-aligned hourly panels: construction, CSV ingestion and
//! descriptive statistics.

mod calendar;
mod csv_io;
mod panel;
mod summary;

pub use calendar::HourlyCalendar;
pub use csv_io::{ingest_csv, ingest_reader, parse_timestamp, schema_for, write_csv, ColumnRole, CsvSchema};
pub use panel::{Frequency, HourlyPanel, PredictorColumn};
pub use summary::{summarize, summarize_column, write_summary, KurtosisConvention, SummaryStats};
