//! Small statistics helpers shared by slide aggregation and cohort evaluation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, StreamRng};
use crate::scalar::{total_cmp, Scalar};

/// Closed interval `[low, high]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval<T> {
    pub low: T,
    pub high: T,
}

impl<T: Scalar> Interval<T> {
    pub fn new(low: T, high: T) -> Self {
        Interval { low, high }
    }

    /// Inclusive containment.
    pub fn contains(&self, x: T) -> bool {
        self.low <= x && x <= self.high
    }

    pub fn width(&self) -> T {
        self.high - self.low
    }
}

/// Settings of a percentile bootstrap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub n_boot: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            n_boot: 10_000,
            alpha: 0.05,
            seed: 0,
        }
    }
}

impl BootstrapConfig {
    pub fn new(n_boot: usize, seed: u64) -> Self {
        BootstrapConfig {
            n_boot,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_boot == 0 {
            return Err(Error::InvalidInput("n_boot must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidInput(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Arithmetic mean. Returns `None` for an empty slice.
pub fn mean<T: Scalar>(xs: &[T]) -> Option<T> {
    if xs.is_empty() {
        return None;
    }
    let sum: T = xs.iter().copied().sum();
    Some(sum / T::from_usize_exact(xs.len()))
}

/// Linear-interpolation empirical quantile of sorted data (R type 7).
pub fn quantile_sorted<T: Scalar>(sorted: &[T], p: f64) -> T {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = T::lit(h - lo as f64);
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Percentile interval `(alpha/2, 1 - alpha/2)` of the given values.
pub fn percentile_interval<T: Scalar>(values: &mut [T], alpha: f64) -> Interval<T> {
    values.sort_by(total_cmp);
    Interval {
        low: quantile_sorted(values, alpha / 2.0),
        high: quantile_sorted(values, 1.0 - alpha / 2.0),
    }
}

/// Runs `n_boot` replicates of `statistic`, each with its own seed stream,
/// in parallel. Output order is replicate order regardless of thread count.
pub(crate) fn replicate<R, F>(config: &BootstrapConfig, statistic: F) -> Vec<R>
where
    R: Send,
    F: Fn(&mut StreamRng) -> R + Sync,
{
    (0..config.n_boot as u64)
        .into_par_iter()
        .map(|i| statistic(&mut stream_rng(config.seed, i)))
        .collect()
}
