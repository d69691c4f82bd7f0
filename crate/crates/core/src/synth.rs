//! Synthetic hourly markets with planted predictor effects.
//!
//! Price is `base + daily and weekly sinusoids + Σ c_k x_k + AR(1) noise +
//! rare spikes`, with predictors drawn as seeded autoregressive processes.
//! The defaults put the mean at 43.32 and the standard deviation near 15,
//! with load carrying the largest price contribution, then wind and solar.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use chrono::{DateTime, TimeZone, Timelike, Utc};
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Frequency, HourlyCalendar, HourlyPanel, PredictorColumn};
use crate::error::{Error, Result};
use crate::seeds;

pub const TARGET_MEAN: f64 = 43.32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Coefficients {
    pub wind: f64,
    pub solar: f64,
    pub load: f64,
    pub coal: f64,
    pub gas: f64,
    pub oil: f64,
    pub fx: f64,
    pub decoy: f64,
}

impl Default for Coefficients {
    fn default() -> Self {
        Self {
            wind: -0.00025,
            solar: -0.0003,
            load: 0.0015,
            coal: 0.0002,
            gas: 0.0005,
            oil: 0.0001,
            fx: 0.0003,
            decoy: 0.0,
        }
    }
}

impl Coefficients {
    pub fn zero() -> Self {
        Self {
            wind: 0.0,
            solar: 0.0,
            load: 0.0,
            coal: 0.0,
            gas: 0.0,
            oil: 0.0,
            fx: 0.0,
            decoy: 0.0,
        }
    }

    fn get(&self, name: &str) -> f64 {
        match name {
            "wind" => self.wind,
            "solar" => self.solar,
            "load" => self.load,
            "coal" => self.coal,
            "gas" => self.gas,
            "oil" => self.oil,
            "fx" => self.fx,
            "decoy" => self.decoy,
            _ => 0.0,
        }
    }
}

/// Hourly AR(1) persistence of each predictor's stochastic part.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Persistence {
    pub wind: f64,
    pub solar: f64,
    pub load: f64,
    /// Daily persistence of the fuel and exchange-rate series.
    pub fuel: f64,
    pub decoy: f64,
}

impl Default for Persistence {
    fn default() -> Self {
        Self {
            wind: 0.95,
            solar: 0.9,
            load: 0.9,
            fuel: 0.95,
            decoy: 0.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub horizon_hours: usize,
    pub start: DateTime<Utc>,
    /// Price level; `None` picks the level that puts the expected mean at
    /// 43.32.
    pub base_price: Option<f64>,
    pub daily_amplitude: f64,
    pub weekly_amplitude: f64,
    pub noise_phi: f64,
    /// Marginal standard deviation of the AR(1) noise.
    pub noise_sigma: f64,
    pub spike_probability: f64,
    /// Mean absolute spike size; 80% of spikes are upward.
    pub spike_scale: f64,
    pub coefficients: Coefficients,
    pub persistence: Persistence,
    /// Adds an hourly predictor named `decoy` (coefficient `coefficients.decoy`).
    pub include_decoy: bool,
    /// Coefficient on the squared standardized load deviation.
    pub convexity: f64,
    /// Solar output is exactly zero for these clock hours (0..24).
    pub night_hours: Vec<u32>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            horizon_hours: 8760,
            start: Utc.with_ymd_and_hms(2010, 1, 1, 0, 0, 0).unwrap(),
            base_price: None,
            daily_amplitude: 8.0,
            weekly_amplitude: 3.0,
            noise_phi: 0.8,
            noise_sigma: 6.0,
            spike_probability: 0.002,
            spike_scale: 30.0,
            coefficients: Coefficients::default(),
            persistence: Persistence::default(),
            include_decoy: false,
            convexity: 0.0,
            night_hours: vec![0, 1, 2, 3, 4, 5, 20, 21, 22, 23],
            seed: 0,
        }
    }
}

// Marginal predictor targets.
const LOAD_MEAN: f64 = 55002.0;
const LOAD_DAILY_AMP: f64 = 8000.0;
const LOAD_WEEKEND_DROP: f64 = 6000.0;
const LOAD_NOISE_SD: f64 = 6500.0;
const WIND_MEAN: f64 = 20622.0;
const WIND_SD: f64 = 18704.0;
const SOLAR_MEAN: f64 = 10627.0;
const SOLAR_CLOUD_SD: f64 = 0.35;
const FUELS: [(&str, f64, f64); 4] = [("coal", 80.0, 5.0), ("gas", 22.0, 2.0), ("oil", 90.0, 8.0), ("fx", 1.3, 0.05)];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub base_price: f64,
    pub coefficients: BTreeMap<String, f64>,
    /// `|c_k| · sd(x_k)` on the generated sample.
    pub contribution_std: BTreeMap<String, f64>,
    pub noise_phi: f64,
    pub noise_sigma: f64,
    #[serde(skip)]
    pub seasonal: Vec<f64>,
    #[serde(skip)]
    pub linear: Vec<f64>,
    #[serde(skip)]
    pub noise: Vec<f64>,
    #[serde(skip)]
    pub spikes: Vec<f64>,
}

impl GroundTruth {
    /// Predictor whose planted contribution varies most.
    pub fn dominant_predictor(&self) -> Option<&str> {
        self.contribution_std
            .iter()
            .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite"))
            .map(|(k, _)| k.as_str())
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon_hours < 336 {
            return Err(Error::Config("synthetic horizon must cover at least two weeks".into()));
        }
        if !(self.noise_phi > -1.0 && self.noise_phi < 1.0) {
            return Err(Error::Config("noise phi must lie in (-1, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.spike_probability) {
            return Err(Error::Config("spike probability must lie in [0, 1)".into()));
        }
        let p = &self.persistence;
        for v in [p.wind, p.solar, p.load, p.fuel, p.decoy] {
            if !(v > -1.0 && v < 1.0) {
                return Err(Error::Config("predictor persistence must lie in (-1, 1)".into()));
            }
        }
        let c = &self.coefficients;
        let all = [c.wind, c.solar, c.load, c.coal, c.gas, c.oil, c.fx, c.decoy];
        if all.iter().any(|v| !v.is_finite())
            || !(self.noise_sigma >= 0.0)
            || !(self.spike_scale >= 0.0)
            || !self.convexity.is_finite()
            || self.base_price.is_some_and(|b| !b.is_finite())
        {
            return Err(Error::Config("synthetic parameters must be finite and scales non-negative".into()));
        }
        if self.night_hours.iter().any(|h| *h >= 24) {
            return Err(Error::Config("night hours must lie in 0..24".into()));
        }
        Ok(())
    }
}

/// Stationary AR(1) path with unit marginal variance.
fn unit_ar(rng: &mut ChaCha8Rng, n: usize, phi: f64) -> Vec<f64> {
    let innov = (1.0 - phi * phi).sqrt();
    let mut out = Vec::with_capacity(n);
    let mut z: f64 = StandardNormal.sample(rng);
    for _ in 0..n {
        out.push(z);
        let e: f64 = StandardNormal.sample(rng);
        z = phi * z + innov * e;
    }
    out
}

fn sample_std(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

pub fn generate(cfg: &SynthConfig) -> Result<(HourlyPanel<f64>, GroundTruth)> {
    cfg.validate()?;
    let n = cfg.horizon_hours;
    let cal = HourlyCalendar::new(cfg.start, n);
    let stream = |k: u64| seeds::rng(seeds::derive(cfg.seed, k));
    let clock = |t: usize| cal.timestamp(t).hour();
    let weekend = |t: usize| matches!(cal.weekday_of(t), chrono::Weekday::Sat | chrono::Weekday::Sun);

    // load: daily profile, weekend drop, persistent deviations
    let mut rng = stream(1);
    let dev = unit_ar(&mut rng, n, cfg.persistence.load);
    let weekend_share = 2.0 / 7.0;
    let load_level = LOAD_MEAN + LOAD_WEEKEND_DROP * weekend_share;
    let load: Vec<f64> = (0..n)
        .map(|t| {
            let h = clock(t) as f64;
            let profile = LOAD_DAILY_AMP * (2.0 * PI * (h - 8.0) / 24.0).sin();
            let drop = if weekend(t) { LOAD_WEEKEND_DROP } else { 0.0 };
            load_level + profile - drop + LOAD_NOISE_SD * dev[t]
        })
        .collect();

    // wind: lognormal transform of a persistent Gaussian process
    let mut rng = stream(2);
    let s2 = (1.0 + (WIND_SD / WIND_MEAN).powi(2)).ln();
    let mu = WIND_MEAN.ln() - s2 / 2.0;
    let wind: Vec<f64> = unit_ar(&mut rng, n, cfg.persistence.wind)
        .into_iter()
        .map(|z| (mu + s2.sqrt() * z).exp())
        .collect();

    // solar: bell over daylight hours scaled by a cloud factor
    let mut rng = stream(3);
    let cloud = unit_ar(&mut rng, n, cfg.persistence.solar);
    let day_hours: Vec<u32> = (0..24).filter(|h| !cfg.night_hours.contains(h)).collect();
    let bell = |h: u32| -> f64 {
        match day_hours.iter().position(|d| *d == h) {
            Some(i) => (PI * (i as f64 + 0.5) / day_hours.len() as f64).sin(),
            None => 0.0,
        }
    };
    let bell_mean = (0..24).map(bell).sum::<f64>() / 24.0;
    let peak = if bell_mean > 0.0 { SOLAR_MEAN / bell_mean } else { 0.0 };
    let solar: Vec<f64> = (0..n)
        .map(|t| {
            let b = bell(clock(t));
            if b == 0.0 {
                0.0
            } else {
                let c = (SOLAR_CLOUD_SD * cloud[t] - SOLAR_CLOUD_SD * SOLAR_CLOUD_SD / 2.0).exp();
                peak * b * c
            }
        })
        .collect();

    let mut columns: Vec<(String, Frequency, Vec<f64>, f64)> = vec![
        ("wind".into(), Frequency::Hourly, wind, WIND_MEAN),
        ("solar".into(), Frequency::Hourly, solar, SOLAR_MEAN),
        ("load".into(), Frequency::Hourly, load, LOAD_MEAN),
    ];

    // fuels and exchange rate: daily AR(1) around a level, constant per day
    let n_days = n.div_ceil(24) + 1;
    for (k, (name, level, sd)) in FUELS.iter().enumerate() {
        let mut rng = stream(10 + k as u64);
        let path = unit_ar(&mut rng, n_days, cfg.persistence.fuel);
        let first = cal.date_of(0);
        let values: Vec<f64> = (0..n)
            .map(|t| {
                let d = (cal.date_of(t) - first).num_days() as usize;
                level + sd * path[d]
            })
            .collect();
        columns.push(((*name).into(), Frequency::Daily, values, *level));
    }
    if cfg.include_decoy {
        let mut rng = stream(20);
        let values: Vec<f64> = unit_ar(&mut rng, n, cfg.persistence.decoy)
            .into_iter()
            .map(|z| 100.0 + 10.0 * z)
            .collect();
        columns.push(("decoy".into(), Frequency::Hourly, values, 100.0));
    }

    let seasonal: Vec<f64> = (0..n)
        .map(|t| {
            let h = t as f64;
            cfg.daily_amplitude * (2.0 * PI * (h - 6.0) / 24.0).sin() + cfg.weekly_amplitude * (2.0 * PI * h / 168.0).cos()
        })
        .collect();

    let mut linear = vec![0.0; n];
    let mut expected_linear = 0.0;
    let mut coefficients = BTreeMap::new();
    let mut contribution_std = BTreeMap::new();
    for (name, _, values, mean) in &columns {
        let c = cfg.coefficients.get(name);
        coefficients.insert(name.clone(), c);
        contribution_std.insert(name.clone(), c.abs() * sample_std(values));
        expected_linear += c * mean;
        for (l, v) in linear.iter_mut().zip(values) {
            *l += c * v;
        }
    }
    if cfg.convexity != 0.0 {
        let load = &columns[2].2;
        let sd = sample_std(load);
        for (l, v) in linear.iter_mut().zip(load) {
            let z = (v - LOAD_MEAN) / sd;
            *l += cfg.convexity * z * z;
        }
        expected_linear += cfg.convexity;
    }

    let mut rng = stream(30);
    let noise: Vec<f64> = unit_ar(&mut rng, n, cfg.noise_phi)
        .into_iter()
        .map(|z| cfg.noise_sigma * z)
        .collect();

    let mut rng = stream(40);
    let spike_size = Exp::new(1.0).expect("unit rate");
    let spikes: Vec<f64> = (0..n)
        .map(|_| {
            if cfg.spike_probability > 0.0 && rng.random::<f64>() < cfg.spike_probability {
                let m = cfg.spike_scale * spike_size.sample(&mut rng);
                if rng.random::<f64>() < 0.8 {
                    m
                } else {
                    -m
                }
            } else {
                0.0
            }
        })
        .collect();
    let expected_spikes = cfg.spike_probability * cfg.spike_scale * 0.6;

    let base = cfg
        .base_price
        .unwrap_or(TARGET_MEAN - expected_linear - expected_spikes);
    let price: Vec<f64> = (0..n)
        .map(|t| base + seasonal[t] + linear[t] + noise[t] + spikes[t])
        .collect();
    let predictors = columns
        .into_iter()
        .map(|(name, frequency, values, _)| PredictorColumn { name, frequency, values })
        .collect();
    let panel = HourlyPanel::new(cal, price, predictors, "synthetic")?;
    Ok((
        panel,
        GroundTruth {
            base_price: base,
            coefficients,
            contribution_std,
            noise_phi: cfg.noise_phi,
            noise_sigma: cfg.noise_sigma,
            seasonal,
            linear,
            noise,
            spikes,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solar_is_zero_at_night() {
        let (p, _) = generate(&SynthConfig {
            horizon_hours: 500,
            ..SynthConfig::default()
        })
        .unwrap();
        let solar = &p.predictor("solar").unwrap().values;
        for t in 0..p.len() {
            let h = p.calendar().timestamp(t).hour();
            if [0, 1, 2, 3, 4, 5, 20, 21, 22, 23].contains(&h) {
                assert_eq!(solar[t], 0.0);
            } else {
                assert!(solar[t] > 0.0);
            }
        }
    }

    #[test]
    fn deterministic_seasonal_has_zero_naive_error() {
        let cfg = SynthConfig {
            horizon_hours: 24 * 21,
            coefficients: Coefficients::zero(),
            noise_sigma: 0.0,
            spike_probability: 0.0,
            ..SynthConfig::default()
        };
        let (p, _) = generate(&cfg).unwrap();
        let y = p.price();
        for t in 168..y.len() {
            assert!((y[t] - y[t - 168]).abs() < 1e-9);
        }
    }

    #[test]
    fn daily_columns_are_constant_within_days() {
        let (p, _) = generate(&SynthConfig::default()).unwrap();
        let gas = &p.predictor("gas").unwrap().values;
        assert!(gas[..24].iter().all(|v| *v == gas[0]));
        assert_ne!(gas[0], gas[24]);
    }

    #[test]
    fn invalid_config() {
        let cfg = SynthConfig {
            noise_phi: 1.0,
            ..SynthConfig::default()
        };
        assert!(matches!(generate(&cfg), Err(Error::Config(_))));
    }
}
