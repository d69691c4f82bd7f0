use std::io::Write;

use super::panel::{Frequency, HourlyPanel};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Which kurtosis is reported.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum KurtosisConvention {
    /// `m4 / m2² − 3`; zero for a normal distribution.
    #[default]
    Excess,
    /// `m4 / m2²`; three for a normal distribution.
    Plain,
}

/// Descriptive statistics for one panel column.
///
/// Skewness is the moment ratio `g1 = m3 / m2^{3/2}`. Higher moments are
/// `None` for constant columns.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryStats<F> {
    pub name: String,
    pub frequency: Frequency,
    pub mean: F,
    pub median: F,
    pub min: F,
    pub max: F,
    pub std_dev: F,
    pub skewness: Option<F>,
    pub kurtosis: Option<F>,
    pub kurtosis_convention: KurtosisConvention,
}

pub fn summarize_column<F: Scalar>(
    name: &str,
    frequency: Frequency,
    values: &[F],
    convention: KurtosisConvention,
) -> Result<SummaryStats<F>> {
    if values.len() < 2 {
        return Err(Error::Precondition(format!("column `{name}` needs at least 2 values")));
    }
    let n = F::of_usize(values.len());
    let mean = values.iter().copied().sum::<F>() / n;
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite panel values"));
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 0 {
        (sorted[mid - 1] + sorted[mid]) / F::of(2.0)
    } else {
        sorted[mid]
    };
    let (mut m2, mut m3, mut m4) = (F::zero(), F::zero(), F::zero());
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let std_dev = (m2 / (n - F::one())).sqrt();
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let constant = m2 <= F::epsilon() * mean.abs().max(F::one()) * F::epsilon();
    let (skewness, kurtosis) = if constant {
        (None, None)
    } else {
        let k = m4 / (m2 * m2);
        let k = match convention {
            KurtosisConvention::Excess => k - F::of(3.0),
            KurtosisConvention::Plain => k,
        };
        (Some(m3 / m2.powf(F::of(1.5))), Some(k))
    };
    Ok(SummaryStats {
        name: name.to_string(),
        frequency,
        mean,
        median,
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        std_dev,
        skewness,
        kurtosis,
        kurtosis_convention: convention,
    })
}

/// Statistics for the price column followed by every predictor.
pub fn summarize<F: Scalar>(panel: &HourlyPanel<F>, convention: KurtosisConvention) -> Result<Vec<SummaryStats<F>>> {
    let mut out = vec![summarize_column("price", Frequency::Hourly, panel.price(), convention)?];
    for c in panel.predictors() {
        out.push(summarize_column(&c.name, c.frequency, &c.values, convention)?);
    }
    Ok(out)
}

/// CSV report; the first line is a comment stating the moment conventions.
pub fn write_summary<F: Scalar, W: Write>(stats: &[SummaryStats<F>], mut w: W) -> Result<()> {
    let conv = stats.first().map(|s| s.kurtosis_convention).unwrap_or_default();
    let kurt = match conv {
        KurtosisConvention::Excess => "excess kurtosis m4/m2^2-3",
        KurtosisConvention::Plain => "plain kurtosis m4/m2^2",
    };
    writeln!(w, "# std: sample (n-1); skewness: g1 = m3/m2^1.5; kurtosis: {kurt}; undefined moments: NA")?;
    writeln!(w, "variable,mean,median,min,max,std_dev,skewness,kurtosis,frequency")?;
    let opt = |v: Option<F>| v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "NA".into());
    for s in stats {
        writeln!(
            w,
            "{},{:.2},{:.2},{:.2},{:.2},{:.2},{},{},{}",
            s.name,
            s.mean,
            s.median,
            s.min,
            s.max,
            s.std_dev,
            opt(s.skewness),
            opt(s.kurtosis),
            s.frequency.label()
        )?;
    }
    Ok(())
}
