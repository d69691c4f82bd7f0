//! Diebold–Mariano comparison of two forecast error series under squared
//! loss, with a Bartlett-kernel long-run variance and the Harvey
//! small-sample correction.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DM_MIN_LENGTH: usize = 168;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DmResult {
    /// Positive when the second series has the smaller squared errors.
    pub statistic: f64,
    /// One-sided p-value for "the second series is more accurate".
    pub p_value: f64,
    pub horizon: usize,
    pub hac_lags: usize,
    pub n: usize,
    /// The loss differential was identically zero.
    pub degenerate: bool,
}

impl DmResult {
    pub fn stars(&self) -> &'static str {
        significance_stars(self.p_value)
    }
}

pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// Upper-tail standard normal probability.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

pub fn diebold_mariano<F: Scalar>(errors_a: &[F], errors_b: &[F], horizon: usize) -> Result<DmResult> {
    let n = errors_a.len();
    if n != errors_b.len() {
        return Err(Error::Pair(format!("{} vs {} errors", n, errors_b.len())));
    }
    if n < DM_MIN_LENGTH {
        return Err(Error::Precondition(format!("DM test needs at least {DM_MIN_LENGTH} paired errors, got {n}")));
    }
    if horizon == 0 || horizon >= n {
        return Err(Error::Config("DM horizon must lie in 1..n".into()));
    }
    let d: Vec<f64> = errors_a
        .iter()
        .zip(errors_b)
        .map(|(a, b)| {
            let (a, b) = (a.as_f64(), b.as_f64());
            a * a - b * b
        })
        .collect();
    let lags = horizon - 1;
    if d.iter().all(|v| *v == 0.0) {
        return Ok(DmResult {
            statistic: 0.0,
            p_value: 1.0,
            horizon,
            hac_lags: lags,
            n,
            degenerate: true,
        });
    }
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let autocov = |k: usize| -> f64 { (k..n).map(|t| (d[t] - mean) * (d[t - k] - mean)).sum::<f64>() / nf };
    let mut lrv = autocov(0);
    for k in 1..=lags {
        lrv += 2.0 * (1.0 - k as f64 / horizon as f64) * autocov(k);
    }
    let h = horizon as f64;
    let harvey = ((nf + 1.0 - 2.0 * h + h * (h - 1.0) / nf) / nf).sqrt();
    let statistic = if lrv > 0.0 {
        harvey * mean / (lrv / nf).sqrt()
    } else {
        mean.signum() * f64::INFINITY
    };
    Ok(DmResult {
        statistic,
        p_value: normal_sf(statistic).clamp(0.0, 1.0),
        horizon,
        hac_lags: lags,
        n,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise(n: usize, k: u64) -> Vec<f64> {
        (0..n).map(|i| (((i as u64 * 2654435761 + k) % 1000) as f64 / 500.0) - 1.0).collect()
    }

    #[test]
    fn identical_series_are_degenerate() {
        let e = noise(200, 1);
        let r = diebold_mariano(&e, &e, 24).unwrap();
        assert!(r.degenerate);
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
        assert_eq!(r.stars(), "");
    }

    #[test]
    fn perfect_second_model_dominates() {
        let a = noise(500, 3);
        let b = vec![0.0; 500];
        let r = diebold_mariano(&a, &b, 24).unwrap();
        assert!(r.statistic > 5.0 && r.p_value < 0.001);
        assert_eq!(r.stars(), "***");
    }

    #[test]
    fn swapping_flips_the_sign() {
        let a = noise(300, 5);
        let b: Vec<f64> = noise(300, 9).iter().map(|v| v * 0.8).collect();
        let x = diebold_mariano(&a, &b, 24).unwrap();
        let y = diebold_mariano(&b, &a, 24).unwrap();
        assert_eq!(x.statistic, -y.statistic);
    }

    #[test]
    fn short_series_rejected() {
        let a = vec![1.0; 100];
        assert!(diebold_mariano(&a, &a, 24).is_err());
    }

    #[test]
    fn normal_tail_values() {
        assert!((normal_sf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_sf(1.959963984540054) - 0.025).abs() < 1e-12);
    }
}
