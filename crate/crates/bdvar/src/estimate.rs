//! Monte Carlo scalar estimates and bitwise-reproducible reductions.
//!
//! All batch statistics in the crate go through [`pairwise_sum`], a fixed
//! midpoint-split tree reduction. Per-path values are first materialized
//! into an index-ordered buffer (in parallel), then reduced sequentially in
//! a shape that depends only on the buffer length. This makes every
//! estimate bitwise identical at any thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// A Monte Carlo scalar with its standard error and provenance.
///
/// `stderr` is the standard error of `value` (for log-of-mean estimators it
/// is obtained by the delta method, `stderr(log m̂) = stderr(m̂)/m̂`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub seed: u64,
}

impl Estimate {
    /// Sample mean and standard error of a batch of per-path values.
    pub fn from_values(values: &[f64], seed: u64) -> Estimate {
        let (mean, stderr) = mean_stderr(values);
        Estimate {
            value: mean,
            stderr,
            n_samples: values.len() as u64,
            seed,
        }
    }

    /// `log` of a sample mean, with delta-method standard error.
    pub fn log_of_mean(values: &[f64], seed: u64) -> Estimate {
        let (mean, stderr) = mean_stderr(values);
        Estimate {
            value: mean.ln(),
            stderr: stderr / mean,
            n_samples: values.len() as u64,
            seed,
        }
    }

    /// An exactly known scalar (zero standard error).
    pub fn exact(value: f64, n_samples: u64, seed: u64) -> Estimate {
        Estimate {
            value,
            stderr: 0.0,
            n_samples,
            seed,
        }
    }
}

/// Root-sum-square of two standard errors, the tolerance unit for
/// inequality and agreement checks between independent estimates.
pub fn combined_stderr(a: &Estimate, b: &Estimate) -> f64 {
    (a.stderr * a.stderr + b.stderr * b.stderr).sqrt()
}

const PAIRWISE_BASE: usize = 128;

/// Pairwise (cascade) summation with a fixed midpoint-split tree.
///
/// The reduction shape depends only on `xs.len()`, never on threading, so
/// repeated runs produce identical bits.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= PAIRWISE_BASE {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        acc
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Two-pass sample mean and standard error (pairwise sums in both passes).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = xs.iter().map(|&x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Evaluate a pure per-index function over `0..n` in parallel, preserving
/// index order. Each slot is a function of its index alone, so the output
/// does not depend on the thread count.
pub fn batch_map<T, F>(n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Fallible variant of [`batch_map`]: the smallest-index error wins, so the
/// reported failure is deterministic as well.
pub fn try_batch_map<T, F>(n: u64, f: F) -> crate::Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> crate::Result<T> + Sync + Send,
{
    let results: Vec<crate::Result<T>> = (0..n).into_par_iter().map(f).collect();
    let mut out = Vec::with_capacity(n as usize);
    for r in results {
        out.push(r?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_small_input() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-9);
    }

    #[test]
    fn mean_stderr_constant_input_has_zero_stderr() {
        let xs = vec![3.25; 4096];
        let (m, s) = mean_stderr(&xs);
        assert_eq!(m, 3.25);
        assert_eq!(s, 0.0);
    }

    #[test]
    fn batch_map_is_index_ordered() {
        let v = batch_map(1000, |i| i * 2);
        assert_eq!(v[0], 0);
        assert_eq!(v[999], 1998);
    }

    #[test]
    fn log_of_mean_delta_method() {
        let xs = vec![1.0, 2.0, 3.0, 4.0];
        let e = Estimate::log_of_mean(&xs, 0);
        let (m, s) = mean_stderr(&xs);
        assert!((e.value - m.ln()).abs() < 1e-15);
        assert!((e.stderr - s / m).abs() < 1e-15);
    }
}
