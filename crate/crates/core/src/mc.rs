//! Parallel Monte Carlo driver.
//!
//! Path `k` is evaluated with streams derived from `(master_seed, k)`. Per-path
//! values are collected in index order and reduced sequentially, so the
//! result does not depend on the number of worker threads.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::{format_real, Real};

/// Number of contiguous batches used by the stability diagnostic.
pub const BATCHES: usize = 10;
/// Batch-mean spread, in pooled batch standard errors, beyond which an
/// estimate is flagged as unstable.
pub const SPREAD_LIMIT: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub master_seed: u64,
}

impl McConfig {
    pub fn new(n_paths: usize, n_steps: usize, master_seed: u64) -> Self {
        Self {
            n_paths,
            n_steps,
            master_seed,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.n_paths < 2 {
            return Err(Error::invalid("n_paths", "need at least 2 paths"));
        }
        if self.n_steps == 0 {
            return Err(Error::invalid("n_steps", "need at least 1 step"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stability<T> {
    Stable,
    /// Batch means disagree by `spread_ratio` pooled batch standard errors.
    Unstable { spread_ratio: T },
    /// `count` paths produced a non-finite value.
    NonFinite { count: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate<T> {
    pub mean: T,
    /// Sample standard deviation over `sqrt(n_paths)`.
    pub stderr: T,
    pub n_paths: usize,
    pub seed: u64,
    pub stability: Stability<T>,
}

impl<T: Real> MonteCarloEstimate<T> {
    pub fn is_stable(&self) -> bool {
        matches!(self.stability, Stability::Stable)
    }

    /// `|mean - reference| / stderr`.
    pub fn z_score(&self, reference: T) -> T {
        (self.mean - reference).abs() / self.stderr
    }

    pub const CSV_HEADER: &'static str = "t,x,mean,stderr,n_paths,seed";

    pub fn write_csv_row<W: Write>(&self, mut out: W, t: T, x: T) -> io::Result<()> {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            format_real(t),
            format_real(x),
            format_real(self.mean),
            format_real(self.stderr),
            self.n_paths,
            self.seed
        )
    }
}

/// Summarizes per-path values (in path order).
pub fn summarize<T: Real>(values: &[T], seed: u64) -> Result<MonteCarloEstimate<T>> {
    let n = values.len();
    if n < 2 {
        return Err(Error::invalid("n_paths", "need at least 2 paths"));
    }
    let non_finite = values.iter().filter(|v| !v.is_finite()).count();
    if non_finite > 0 {
        return Ok(MonteCarloEstimate {
            mean: T::nan(),
            stderr: T::nan(),
            n_paths: n,
            seed,
            stability: Stability::NonFinite { count: non_finite },
        });
    }
    let (mean, sd) = mean_and_sd(values);
    Ok(MonteCarloEstimate {
        mean,
        stderr: sd / T::from_count(n).sqrt(),
        n_paths: n,
        seed,
        stability: batch_stability(values),
    })
}

fn mean_and_sd<T: Real>(values: &[T]) -> (T, T) {
    let n = T::from_count(values.len());
    let mean = values.iter().copied().sum::<T>() / n;
    if values.len() < 2 {
        return (mean, T::zero());
    }
    let ss = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>();
    (mean, (ss / (n - T::one())).sqrt())
}

/// Splits the paths into [`BATCHES`] contiguous batches and compares the
/// spread of their means with a pooled batch standard error built from the
/// median within-batch deviation. The median keeps one heavy-tailed batch
/// from inflating its own yardstick.
fn batch_stability<T: Real>(values: &[T]) -> Stability<T> {
    let size = values.len() / BATCHES;
    if size < 2 {
        return Stability::Stable;
    }
    let mut means = Vec::with_capacity(BATCHES);
    let mut sds = Vec::with_capacity(BATCHES);
    for batch in values.chunks_exact(size).take(BATCHES) {
        let (m, s) = mean_and_sd(batch);
        means.push(m);
        sds.push(s);
    }
    sds.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let pooled_sd = (sds[BATCHES / 2 - 1] + sds[BATCHES / 2]) * T::lit(0.5);
    let batch_se = pooled_sd / T::from_count(size).sqrt();
    let hi = means.iter().copied().fold(T::neg_infinity(), T::max);
    let lo = means.iter().copied().fold(T::infinity(), T::min);
    let spread = hi - lo;
    if spread == T::zero() {
        return Stability::Stable;
    }
    let ratio = spread / batch_se;
    if ratio > T::lit(SPREAD_LIMIT) {
        Stability::Unstable { spread_ratio: ratio }
    } else {
        Stability::Stable
    }
}

/// Evaluates `path(k)` for `k in 0..n_paths` in parallel.
///
/// Euler runs aborted by a non-finite coefficient count as non-finite
/// samples; every other error is returned (the one with the smallest path
/// index, so the outcome is schedule independent).
pub fn run<T, F>(n_paths: usize, seed: u64, path: F) -> Result<MonteCarloEstimate<T>>
where
    T: Real,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let values = collect(n_paths, path)?;
    summarize(&values, seed)
}

/// Per-path values in path order, with the same error policy as [`run`].
pub fn collect<T, F>(n_paths: usize, path: F) -> Result<Vec<T>>
where
    T: Real,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let outcomes: Vec<Result<T>> = (0..n_paths as u64).into_par_iter().map(&path).collect();
    outcomes
        .into_iter()
        .map(|r| match r {
            Err(Error::NonFiniteCoefficient { .. }) => Ok(T::nan()),
            other => other,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;

    #[test]
    fn constant_values_have_zero_stderr() {
        let est = run(1000, 3, |_| Ok(2.5_f64)).unwrap();
        assert_eq!(est.mean, 2.5);
        assert_eq!(est.stderr, 0.0);
        assert_eq!(est.n_paths, 1000);
        assert!(est.is_stable());
    }

    #[test]
    fn stderr_definition() {
        let est = summarize(&[1.0_f64, 2.0, 3.0, 4.0], 0).unwrap();
        assert_eq!(est.mean, 2.5);
        let sd = (5.0_f64 / 3.0).sqrt();
        assert!((est.stderr - sd / 2.0).abs() < 1e-15);
        assert!(summarize(&[1.0_f64], 0).is_err());
    }

    #[test]
    fn gaussian_samples_are_stable() {
        for seed in 0..20 {
            let est = run(20_000, seed, |k| Ok(derive_stream(seed, k).standard_gaussian::<f64>())).unwrap();
            assert!(est.is_stable(), "seed {seed}: {:?}", est.stability);
        }
    }

    #[test]
    fn cauchy_samples_are_flagged() {
        let flagged = (0..10)
            .filter(|&seed| {
                let est = run(100_000, seed, |k| Ok(derive_stream(seed, k).standard_cauchy::<f64>())).unwrap();
                !est.is_stable()
            })
            .count();
        // A Cauchy batch mean is itself standard Cauchy, so a few runs land
        // inside the band by chance.
        assert!(flagged >= 5, "only {flagged} of 10 Cauchy runs flagged");
    }

    #[test]
    fn non_finite_values_are_reported() {
        let est = run(100, 0, |k| Ok(if k == 17 { f64::INFINITY } else { 1.0 })).unwrap();
        assert_eq!(est.stability, Stability::NonFinite { count: 1 });
        assert!(est.mean.is_nan());
        let est = run(100, 0, |k| {
            if k % 50 == 0 {
                Err(Error::NonFiniteCoefficient { step: 3 })
            } else {
                Ok(1.0_f64)
            }
        })
        .unwrap();
        assert_eq!(est.stability, Stability::NonFinite { count: 2 });
    }

    #[test]
    fn first_error_wins() {
        let err = run::<f64, _>(100, 0, |k| {
            if k >= 40 {
                Err(Error::invalid("x", format!("path {k}")))
            } else {
                Ok(0.0)
            }
        })
        .unwrap_err();
        assert_eq!(err, Error::invalid("x", "path 40"));
    }

    #[test]
    fn independent_of_thread_count() {
        let job = || run(50_000, 9, |k| Ok(derive_stream(9, k).standard_gaussian::<f64>().exp())).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(job);
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(job);
        assert_eq!(one, four);
    }
}
