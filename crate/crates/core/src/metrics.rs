//! Aggregate statistics over Monte Carlo drops.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no samples")]
    Empty,
    #[error("sample {index} is not finite: {value}")]
    NonFinite { index: usize, value: f64 },
    #[error("median of the reference series is zero")]
    ZeroDenominator,
    #[error("percentile {0} outside [0, 100]")]
    BadQuantile(f64),
}

/// Jain's fairness index `(Σx)² / (n Σx²)`.
///
/// An all-zero vector is treated as perfectly fair and returns 1.
pub fn jain_index(se: &[f64]) -> f64 {
    let n = se.len() as f64;
    let sum: f64 = se.iter().sum();
    let sum_sq: f64 = se.iter().map(|x| x * x).sum();
    if sum_sq == 0.0 {
        return 1.0;
    }
    sum * sum / (n * sum_sq)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub metric: String,
    pub strategy: String,
    pub mu: String,
    pub weight_mode: String,
}

impl SeriesMeta {
    pub fn new(
        metric: impl Into<String>,
        strategy: impl Into<String>,
        mu: f64,
        weight_mode: impl Into<String>,
    ) -> Self {
        SeriesMeta {
            metric: metric.into(),
            strategy: strategy.into(),
            mu: format!("{mu}"),
            weight_mode: weight_mode.into(),
        }
    }

    /// File stem such as `jain_c-hun_mu0.9_sr`.
    pub fn file_stem(&self) -> String {
        format!(
            "{}_{}_mu{}_{}",
            self.metric, self.strategy, self.mu, self.weight_mode
        )
    }
}

/// Empirical CDF: sorted samples with probabilities k/N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfSeries {
    pub meta: SeriesMeta,
    pub values: Vec<f64>,
    pub probabilities: Vec<f64>,
}

pub fn empirical_cdf(samples: &[f64], meta: SeriesMeta) -> Result<CdfSeries, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::Empty);
    }
    if let Some((index, &value)) = samples.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(MetricsError::NonFinite { index, value });
    }
    let mut values = samples.to_vec();
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let probabilities = (1..=values.len()).map(|k| k as f64 / n).collect();
    Ok(CdfSeries {
        meta,
        values,
        probabilities,
    })
}

impl CdfSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Nearest-rank percentile, `q` in `[0, 100]`. `q = 0` gives the minimum.
    pub fn percentile(&self, q: f64) -> Result<f64, MetricsError> {
        percentile(self, q)
    }

    pub fn median(&self) -> f64 {
        percentile(self, 50.0).expect("non-empty series")
    }

    /// CSV with a metadata comment line, a column header, then one
    /// `value,probability` row per sample.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * (self.values.len() + 2));
        let m = &self.meta;
        let _ = writeln!(
            out,
            "# {},{},{},{}",
            m.metric, m.strategy, m.mu, m.weight_mode
        );
        out.push_str("value,probability\n");
        for (v, p) in self.values.iter().zip(&self.probabilities) {
            let _ = writeln!(out, "{v},{p}");
        }
        out
    }
}

pub fn percentile(cdf: &CdfSeries, q: f64) -> Result<f64, MetricsError> {
    if cdf.values.is_empty() {
        return Err(MetricsError::Empty);
    }
    if !(0.0..=100.0).contains(&q) {
        return Err(MetricsError::BadQuantile(q));
    }
    let n = cdf.values.len();
    let rank = ((q / 100.0) * n as f64).ceil() as usize;
    Ok(cdf.values[rank.clamp(1, n) - 1])
}

/// `(p50(a) - p50(b)) / p50(b)`.
pub fn median_gap(a: &CdfSeries, b: &CdfSeries) -> Result<f64, MetricsError> {
    let (ma, mb) = (percentile(a, 50.0)?, percentile(b, 50.0)?);
    if mb == 0.0 {
        return Err(MetricsError::ZeroDenominator);
    }
    Ok((ma - mb) / mb)
}
