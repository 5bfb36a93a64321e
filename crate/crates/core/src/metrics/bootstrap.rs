// SPDX-License-Identifier: Apache-2.0

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_RESAMPLES: usize = 1000;
pub const DEFAULT_LEVEL: f64 = 0.95;
pub const MIN_RESAMPLES: usize = 100;

/// Point estimate with a percentile bootstrap interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub name: String,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
    pub bootstrap_b: usize,
    pub seed: u64,
    pub level: f64,
}

impl MetricSummary {
    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn contains(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }
}

/// Linear interpolation between closest ranks of sorted data.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty() && (0.0..=1.0).contains(&q));
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Means of `b` resamples of `values`. Resample `r` draws its `n` indices
/// consecutively from one ChaCha8 stream seeded with `seed`, via
/// `random_range(0..n)`.
pub fn resample_means(values: &[f64], b: usize, seed: u64) -> Vec<f64> {
    let n = values.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..b)
        .map(|_| {
            let mut acc = 0.0;
            for _ in 0..n {
                acc += values[rng.random_range(0..n)];
            }
            acc / n as f64
        })
        .collect()
}

fn check(n: usize, b: usize, level: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::domain("bootstrap needs at least one value"));
    }
    if b < MIN_RESAMPLES {
        return Err(Error::domain(format!(
            "bootstrap needs B >= {MIN_RESAMPLES}, got {b}"
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!(
            "level must be in (0, 1), got {level}"
        )));
    }
    Ok(())
}

/// Percentile bootstrap interval of the mean at confidence `level`.
pub fn bootstrap_ci(values: &[f64], b: usize, level: f64, seed: u64) -> Result<MetricSummary> {
    check(values.len(), b, level)?;
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::domain(format!(
            "non-finite value {bad} in bootstrap input"
        )));
    }
    let m = mean(values);
    let mut means = resample_means(values, b, seed);
    means.sort_unstable_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    let (lo, hi) = (percentile(&means, alpha), percentile(&means, 1.0 - alpha));
    Ok(MetricSummary {
        name: String::new(),
        mean: m,
        // rounding can leave the sample mean an ulp outside a degenerate interval
        ci_low: lo.min(m),
        ci_high: hi.max(m),
        n: values.len(),
        bootstrap_b: b,
        seed,
        level,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedDelta {
    /// Mean of `a - b` and its interval.
    pub summary: MetricSummary,
    pub zero_in_interval: bool,
}

impl PairedDelta {
    /// True when the interval covers zero and the mean delta is within `threshold`.
    pub fn no_measurable_difference(&self, threshold: f64) -> bool {
        self.zero_in_interval && self.summary.mean.abs() <= threshold
    }
}

/// Bootstrap of the mean paired difference, resampling question indices jointly.
pub fn paired_delta_ci(
    values_a: &[f64],
    values_b: &[f64],
    b: usize,
    level: f64,
    seed: u64,
) -> Result<PairedDelta> {
    if values_a.len() != values_b.len() {
        return Err(Error::domain(format!(
            "paired inputs differ in length: {} vs {}",
            values_a.len(),
            values_b.len()
        )));
    }
    let deltas: Vec<f64> = values_a.iter().zip(values_b).map(|(a, b)| a - b).collect();
    let summary = bootstrap_ci(&deltas, b, level, seed)?;
    Ok(PairedDelta {
        zero_in_interval: summary.contains(0.0),
        summary,
    })
}
