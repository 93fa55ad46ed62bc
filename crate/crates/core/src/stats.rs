//! Empirical CDFs and lower empirical quantiles.

use crate::error::{Result, SimError};

/// Number of probe points used for exported CDF tables.
pub const CDF_PROBES: usize = 201;

/// Lower empirical quantile of already sorted samples: the value at index
/// `ceil(p n) - 1`, clamped to the sample range.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let n = sorted.len();
    let idx = ((p * n as f64).ceil() as usize).clamp(1, n) - 1;
    sorted[idx]
}

pub fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Fraction of sorted samples at or below `x`.
pub fn ecdf_sorted(sorted: &[f64], x: f64) -> f64 {
    sorted.partition_point(|&v| v <= x) as f64 / sorted.len() as f64
}

/// `n` evenly spaced probes spanning `[min, max]`.
pub fn probe_points(min: f64, max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![min],
        _ => (0..n)
            .map(|i| if i == n - 1 { max } else { min + (max - min) * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdfSummary {
    /// `(probe, F(probe))` rows.
    pub cdf: Vec<(f64, f64)>,
    pub p5: f64,
    pub p50: f64,
    pub mean: f64,
    pub count: usize,
}

/// Empirical CDF at `probes` plus the 5th and 50th percentiles.
pub fn cdf_and_percentiles(samples: &[f64], probes: &[f64]) -> Result<CdfSummary> {
    if samples.is_empty() {
        return Err(SimError::EmptySamples);
    }
    let s = sorted(samples);
    Ok(CdfSummary {
        cdf: probes.iter().map(|&x| (x, ecdf_sorted(&s, x))).collect(),
        p5: percentile_sorted(&s, 0.05),
        p50: percentile_sorted(&s, 0.5),
        mean: s.iter().sum::<f64>() / s.len() as f64,
        count: s.len(),
    })
}

/// As [`cdf_and_percentiles`] with [`CDF_PROBES`] probes over the finite
/// sample range. Without finite samples the single probe is the smallest
/// sample.
pub fn summarize(samples: &[f64]) -> Result<CdfSummary> {
    if samples.is_empty() {
        return Err(SimError::EmptySamples);
    }
    let s = sorted(samples);
    let finite: Vec<f64> = s.iter().copied().filter(|x| x.is_finite()).collect();
    let probes = match (finite.first(), finite.last()) {
        (Some(&lo), Some(&hi)) if lo < hi => probe_points(lo, hi, CDF_PROBES),
        (Some(&lo), _) => vec![lo],
        _ => vec![s[0]],
    };
    cdf_and_percentiles(&s, &probes)
}

/// Relative gain `new / old - 1`.
pub fn gain(new: f64, old: f64) -> f64 {
    new / old - 1.0
}
