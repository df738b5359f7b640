//! Mean curves with normal-approximation confidence bands across seeds.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ExperimentResult, RunRecord};
use crate::oracle::OracleValues;

/// Per-episode mean and 95% band of one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub mean: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Runs that define the metric.
    pub runs: usize,
}

impl Band {
    /// Mean and `±1.96 s/sqrt(n)` with the sample standard deviation; the
    /// band collapses to the mean for a single run.
    pub fn from_series(series: &[&[f64]]) -> Option<Self> {
        let n = series.len();
        let len = series.iter().map(|s| s.len()).min()?;
        let mut band = Band {
            mean: Vec::with_capacity(len),
            lo: Vec::with_capacity(len),
            hi: Vec::with_capacity(len),
            runs: n,
        };
        for t in 0..len {
            let mean = series.iter().map(|s| s[t]).sum::<f64>() / n as f64;
            let half = if n > 1 {
                let var = series.iter().map(|s| (s[t] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                1.96 * (var / n as f64).sqrt()
            } else {
                0.0
            };
            band.mean.push(mean);
            band.lo.push(mean - half);
            band.hi.push(mean + half);
        }
        Some(band)
    }

    pub fn last(&self) -> Option<(f64, f64, f64)> {
        let i = self.mean.len().checked_sub(1)?;
        Some((self.mean[i], self.lo[i], self.hi[i]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedInfo {
    pub seed: u64,
    pub oracle: OracleValues,
    pub events: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalValue {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub runs: usize,
}

/// Aggregated view of one algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub algorithm: String,
    /// Metric name to final cumulative value.
    pub final_values: BTreeMap<String, FinalValue>,
    pub seeds: Vec<SeedInfo>,
    /// Runs that failed, as `(seed, message)`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<(u64, String)>,
    #[serde(skip)]
    pub bands: Vec<(String, Band)>,
}

impl SummaryEntry {
    pub fn band(&self, metric: &str) -> Option<&Band> {
        self.bands.iter().find(|(n, _)| n == metric).map(|(_, b)| b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema: u32,
    pub name: String,
    pub config_hash: String,
    pub horizon: usize,
    pub reps: usize,
    pub algorithms: Vec<SummaryEntry>,
}

impl Summary {
    pub fn entry(&self, algorithm: &str) -> Option<&SummaryEntry> {
        self.algorithms.iter().find(|e| e.algorithm == algorithm)
    }
}

pub const METRICS: [&str; 4] = ["regret", "alpha_regret", "violation", "positive_violation"];

fn entry_for(algorithm: &str, records: &[&RunRecord]) -> SummaryEntry {
    let cumulative: Vec<_> = records.iter().map(|r| r.stream.cumulative(&r.oracle)).collect();
    let mut bands = Vec::new();
    let mut final_values = BTreeMap::new();
    for metric in METRICS {
        let series: Vec<&[f64]> = cumulative
            .iter()
            .filter_map(|c| c.named().into_iter().find(|(n, _)| *n == metric).map(|(_, s)| s))
            .collect();
        if series.is_empty() {
            continue;
        }
        if series.len() < records.len() {
            log::warn!(
                "{algorithm}: {metric} is defined for {} of {} runs",
                series.len(),
                records.len()
            );
        }
        if let Some(band) = Band::from_series(&series) {
            if let Some((mean, ci_low, ci_high)) = band.last() {
                final_values.insert(
                    metric.to_string(),
                    FinalValue { mean, ci_low, ci_high, runs: band.runs },
                );
            }
            bands.push((metric.to_string(), band));
        }
    }
    SummaryEntry {
        algorithm: algorithm.to_string(),
        final_values,
        seeds: records
            .iter()
            .map(|r| SeedInfo {
                seed: r.seed,
                oracle: r.oracle,
                events: r.event_counts(),
            })
            .collect(),
        failures: Vec::new(),
        bands,
    }
}

/// Aggregates every algorithm of an experiment in configuration order.
pub fn aggregate(result: &ExperimentResult) -> Summary {
    if result.config.reps == 1 {
        log::warn!("a single repetition gives zero-width confidence bands");
    }
    let algorithms = result
        .config
        .algorithms
        .iter()
        .map(|spec| {
            let mut records: Vec<&RunRecord> = result.records_for(spec.label()).collect();
            records.sort_by_key(|r| r.seed);
            let mut entry = entry_for(spec.label(), &records);
            entry.failures = result
                .records
                .iter()
                .filter(|r| r.algorithm == spec.label())
                .filter_map(|r| r.error.clone().map(|e| (r.seed, e)))
                .collect();
            entry.failures.sort();
            entry
        })
        .collect();
    Summary {
        schema: 1,
        name: result.config.name.clone(),
        config_hash: result.config.hash(),
        horizon: result.config.horizon,
        reps: result.config.reps,
        algorithms,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_uses_sample_deviation() {
        let a = [1.0, 2.0];
        let b = [3.0, 2.0];
        let band = Band::from_series(&[&a, &b]).unwrap();
        assert_eq!(band.mean, vec![2.0, 2.0]);
        // s = sqrt(2), half width = 1.96 * sqrt(2) / sqrt(2)
        assert!((band.hi[0] - 3.96).abs() < 1e-12);
        assert!((band.lo[0] - 0.04).abs() < 1e-12);
        assert_eq!(band.lo[1], band.hi[1]);
    }

    #[test]
    fn two_final_regrets() {
        let band = Band::from_series(&[&[10.0], &[14.0]]).unwrap();
        let (mean, lo, hi) = band.last().unwrap();
        assert_eq!(mean, 12.0);
        // s = 2 sqrt(2), half width 1.96 * 2 sqrt(2) / sqrt(2)
        assert!((hi - 15.92).abs() < 1e-12);
        assert!((lo - 8.08).abs() < 1e-12);
    }

    #[test]
    fn single_run_band_is_degenerate() {
        let a = [0.5, 1.5];
        let band = Band::from_series(&[&a]).unwrap();
        assert_eq!(band.lo, band.mean);
        assert_eq!(band.hi, band.mean);
    }
}
