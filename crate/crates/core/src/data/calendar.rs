use chrono::{DateTime, Datelike, Duration, NaiveDate, Timelike, Utc, Weekday};
use serde::{Deserialize, Serialize};

/// Contiguous run of UTC hours `t = 0..len`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HourlyCalendar {
    start: DateTime<Utc>,
    len: usize,
}

impl HourlyCalendar {
    /// `start` is truncated to the hour.
    pub fn new(start: DateTime<Utc>, len: usize) -> Self {
        let start = start
            .with_minute(0)
            .and_then(|s| s.with_second(0))
            .and_then(|s| s.with_nanosecond(0))
            .unwrap_or(start);
        Self { start, len }
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.start
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn timestamp(&self, t: usize) -> DateTime<Utc> {
        self.start + Duration::hours(t as i64)
    }

    pub fn weekday_of(&self, t: usize) -> Weekday {
        self.timestamp(t).weekday()
    }

    /// Hour of the day in `1..=24` (hour 1 covers 00:00–01:00 UTC).
    pub fn hour_of_day(&self, t: usize) -> usize {
        self.timestamp(t).hour() as usize + 1
    }

    pub fn date_of(&self, t: usize) -> NaiveDate {
        self.timestamp(t).date_naive()
    }

    /// Index of the first hour at or after `t` that begins a calendar day.
    pub fn next_day_start(&self, t: usize) -> usize {
        let h = self.hour_of_day(t) - 1;
        if h == 0 {
            t
        } else {
            t + 24 - h
        }
    }

    /// Sub-calendar starting at hour `from` with `len` hours.
    pub fn shifted(&self, from: usize, len: usize) -> Self {
        Self {
            start: self.timestamp(from),
            len,
        }
    }

    pub fn format_timestamp(&self, t: usize) -> String {
        self.timestamp(t).format("%Y-%m-%dT%H:%M:%SZ").to_string()
    }
}
