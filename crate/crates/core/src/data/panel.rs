use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::calendar::HourlyCalendar;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Native sampling frequency of a predictor before alignment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Frequency {
    #[default]
    Hourly,
    Daily,
}

impl Frequency {
    pub fn label(self) -> &'static str {
        match self {
            Frequency::Hourly => "Hourly",
            Frequency::Daily => "Daily",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictorColumn<F> {
    pub name: String,
    pub frequency: Frequency,
    pub values: Vec<F>,
}

/// Calendar-aligned hourly prices and external predictors.
///
/// Every column has exactly `calendar.len()` entries and no missing values;
/// daily columns are constant over each calendar day.
#[derive(Clone, Debug, PartialEq)]
pub struct HourlyPanel<F> {
    calendar: HourlyCalendar,
    price: Vec<F>,
    predictors: Vec<PredictorColumn<F>>,
    market_label: String,
}

impl<F: Scalar> HourlyPanel<F> {
    pub fn new(
        calendar: HourlyCalendar,
        price: Vec<F>,
        predictors: Vec<PredictorColumn<F>>,
        market_label: impl Into<String>,
    ) -> Result<Self> {
        let t = calendar.len();
        if price.len() != t {
            return Err(Error::Schema(format!(
                "price has {} values for a {t}-hour calendar",
                price.len()
            )));
        }
        let mut seen = HashSet::new();
        for col in &predictors {
            if !seen.insert(col.name.as_str()) {
                return Err(Error::Schema(format!("duplicate predictor `{}`", col.name)));
            }
            if col.values.len() != t {
                return Err(Error::Schema(format!(
                    "predictor `{}` has {} values for a {t}-hour calendar",
                    col.name,
                    col.values.len()
                )));
            }
            if col.name == "price" || col.name == "timestamp" {
                return Err(Error::Schema(format!("reserved column name `{}`", col.name)));
            }
        }
        if let Some(bad) = price.iter().position(|v| !v.is_finite()) {
            return Err(Error::Missing {
                row: bad + 1,
                column: "price".into(),
            });
        }
        for col in &predictors {
            if let Some(bad) = col.values.iter().position(|v| !v.is_finite()) {
                return Err(Error::Missing {
                    row: bad + 1,
                    column: col.name.clone(),
                });
            }
        }
        Ok(Self {
            calendar,
            price,
            predictors,
            market_label: market_label.into(),
        })
    }

    pub fn calendar(&self) -> &HourlyCalendar {
        &self.calendar
    }

    pub fn len(&self) -> usize {
        self.calendar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn price(&self) -> &[F] {
        &self.price
    }

    pub fn predictors(&self) -> &[PredictorColumn<F>] {
        &self.predictors
    }

    pub fn predictor(&self, name: &str) -> Option<&PredictorColumn<F>> {
        self.predictors.iter().find(|c| c.name == name)
    }

    pub fn predictor_names(&self) -> Vec<String> {
        self.predictors.iter().map(|c| c.name.clone()).collect()
    }

    pub fn market_label(&self) -> &str {
        &self.market_label
    }

    /// Contiguous sub-panel covering hours `from..to`.
    pub fn slice(&self, from: usize, to: usize) -> Result<Self> {
        if from >= to || to > self.len() {
            return Err(Error::Range(format!(
                "slice {from}..{to} outside panel of {} hours",
                self.len()
            )));
        }
        Ok(Self {
            calendar: self.calendar.shifted(from, to - from),
            price: self.price[from..to].to_vec(),
            predictors: self
                .predictors
                .iter()
                .map(|c| PredictorColumn {
                    name: c.name.clone(),
                    frequency: c.frequency,
                    values: c.values[from..to].to_vec(),
                })
                .collect(),
            market_label: self.market_label.clone(),
        })
    }
}
