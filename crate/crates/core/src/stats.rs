//! Trajectory statistics, density comparison and strong-error measurement.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::iterated::{compose_knots, simulate_iterated};
use crate::mc::{self, McConfig, MonteCarloEstimate};
use crate::processes::{ProcessSpec, ToCoefficients};
use crate::feynman_kac::subordinate;
use crate::quadrature::QuadratureRule;
use crate::rng::{RngStream, POSITION_LANE, TIME_LANE};
use crate::scalar::{format_real, Real};
use crate::sde::euler_path_with_increments;

/// Fine substrate steps for `X` per reference-level step.
pub const SUBSTRATE_FACTOR: usize = 16;
const RETRY_LANE: u64 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram<T> {
    edges: Vec<T>,
    counts: Vec<usize>,
    total: usize,
}

impl<T: Real> Histogram<T> {
    /// Freedman-Diaconis binning over the sample range.
    pub fn from_samples(samples: &[T]) -> Result<Self> {
        let sorted = sorted_finite(samples)?;
        let n = sorted.len();
        let (lo, hi) = (sorted[0], sorted[n - 1]);
        if lo == hi {
            let half = T::lit(0.5);
            return Self::with_edges(vec![lo - half, hi + half], samples);
        }
        let iqr = quantile(&sorted, T::lit(0.75)) - quantile(&sorted, T::lit(0.25));
        let width = T::lit(2.0) * iqr / T::from_count(n).cbrt();
        let bins = if width > T::zero() {
            ((hi - lo) / width).ceil().to_usize().unwrap_or(1)
        } else {
            (n as f64).sqrt().ceil() as usize
        }
        .clamp(1, 10_000);
        let step = (hi - lo) / T::from_count(bins);
        let mut edges: Vec<T> = (0..bins).map(|i| lo + step * T::from_count(i)).collect();
        edges.push(hi);
        Self::with_edges(edges, samples)
    }

    /// Counts samples in `[e_i, e_{i+1})`, the last bin closed.
    pub fn with_edges(edges: Vec<T>, samples: &[T]) -> Result<Self> {
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("edges", "need at least two strictly increasing edges"));
        }
        let (first, last) = (edges[0], edges[edges.len() - 1]);
        let bins = edges.len() - 1;
        let mut counts = vec![0; bins];
        for &x in samples {
            if !(x >= first && x <= last) {
                return Err(Error::OutOfRange {
                    what: "sample",
                    value: x.as_f64(),
                    lower: first.as_f64(),
                    upper: last.as_f64(),
                });
            }
            let idx = edges.partition_point(|&e| e <= x).saturating_sub(1);
            counts[idx.min(bins - 1)] += 1;
        }
        Ok(Self {
            edges,
            counts,
            total: samples.len(),
        })
    }

    pub fn edges(&self) -> &[T] {
        &self.edges
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// Bin heights normalized to unit area.
    pub fn density(&self) -> Vec<T> {
        let n = T::from_count(self.total.max(1));
        self.counts
            .iter()
            .zip(self.edges.windows(2))
            .map(|(&c, w)| T::from_count(c) / (n * (w[1] - w[0])))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "bin_left,bin_right,count")?;
        for (c, w) in self.counts.iter().zip(self.edges.windows(2)) {
            writeln!(out, "{},{},{}", format_real(w[0]), format_real(w[1]), c)?;
        }
        Ok(())
    }
}

fn sorted_finite<T: Real>(samples: &[T]) -> Result<Vec<T>> {
    if samples.is_empty() {
        return Err(Error::invalid("samples", "must be nonempty"));
    }
    if let Some(bad) = samples.iter().find(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("sample {bad}")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    Ok(sorted)
}

/// Linear-interpolation quantile of sorted data.
fn quantile<T: Real>(sorted: &[T], p: T) -> T {
    let pos = p * T::from_count(sorted.len() - 1);
    let i = pos.floor().to_usize().unwrap_or(0).min(sorted.len() - 1);
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] + (sorted[j] - sorted[i]) * (pos - T::from_count(i))
}

fn streams(seed: u64, k: u64) -> (RngStream, RngStream) {
    (
        RngStream::derive_lane(seed, k, TIME_LANE),
        RngStream::derive_lane(seed, k, POSITION_LANE),
    )
}

/// Monte Carlo mean of `sum_k (Z(t_k) - Z(t_{k-1}))^q` over the scheme's own
/// knot grid, with `cfg.n_steps` knots on `[0, t]` and `X_0 = Y_0 = 0`.
pub fn variation_estimate<T, P, Q>(
    position: &P,
    time_process: &Q,
    order: u32,
    t: T,
    cfg: &McConfig,
) -> Result<MonteCarloEstimate<T>>
where
    T: Real,
    P: ToCoefficients<T> + Sync + ?Sized,
    Q: ToCoefficients<T> + Sync + ?Sized,
{
    if order == 0 {
        return Err(Error::invalid("order", "must be at least 1"));
    }
    if !(t > T::zero()) {
        return Err(Error::invalid("t", "must be positive"));
    }
    cfg.validate()?;
    let q = order as i32;
    mc::run(cfg.n_paths, cfg.master_seed, |k| {
        let (mut ts, mut ps) = streams(cfg.master_seed, k);
        let path = simulate_iterated(position, time_process, T::zero(), T::zero(), t, cfg.n_steps, &mut ts, &mut ps)?;
        Ok(path.knots().windows(2).map(|w| (w[1] - w[0]).powi(q)).sum())
    })
}

/// Terminal values `Z_t` of `cfg.n_paths` scheme paths, in path order.
pub fn terminal_samples<T, P, Q>(
    position: &P,
    time_process: &Q,
    t: T,
    x0: T,
    cfg: &McConfig,
) -> Result<Vec<T>>
where
    T: Real,
    P: ToCoefficients<T> + Sync + ?Sized,
    Q: ToCoefficients<T> + Sync + ?Sized,
{
    cfg.validate()?;
    mc::collect(cfg.n_paths, |k| {
        let (mut ts, mut ps) = streams(cfg.master_seed, k);
        let path = simulate_iterated(position, time_process, x0, T::zero(), t, cfg.n_steps, &mut ts, &mut ps)?;
        Ok(path.terminal())
    })
}

/// `p_Z(z) = 2 int_0^inf E(p_Y)(t, 0, u) p_X(u, x0, z) du`.
pub fn iterated_density<T: Real>(
    position: &ProcessSpec<T>,
    time_process: &ProcessSpec<T>,
    t: T,
    x0: T,
    z: T,
    quad: &QuadratureRule<T>,
) -> Result<T> {
    position.transition_density(T::one(), x0, x0)?;
    let d = z - x0;
    subordinate(time_process, t, quad, &[d * d], |u| position.transition_density(u, x0, z))
}

/// `P(Z_t <= z)`, by the same subordination as [`iterated_density`].
pub fn iterated_cdf<T: Real>(
    position: &ProcessSpec<T>,
    time_process: &ProcessSpec<T>,
    t: T,
    x0: T,
    z: T,
    quad: &QuadratureRule<T>,
) -> Result<T> {
    position.transition_cdf(T::one(), x0, x0)?;
    let d = z - x0;
    subordinate(time_process, t, quad, &[d * d], |u| position.transition_cdf(u, x0, z))
}

/// One-sample Kolmogorov-Smirnov distance `sup |F_n - F|`, evaluated
/// exactly at the order statistics.
pub fn ks_one_sample<T, F>(samples: &[T], cdf: F) -> Result<T>
where
    T: Real,
    F: Fn(T) -> Result<T> + Sync,
{
    let sorted = sorted_finite(samples)?;
    let n = T::from_count(sorted.len());
    let values: Vec<Result<T>> = sorted.par_iter().map(|&x| cdf(x)).collect();
    let mut d = T::zero();
    for (i, f) in values.into_iter().enumerate() {
        let f = f?;
        let above = T::from_count(i + 1) / n - f;
        let below = f - T::from_count(i) / n;
        d = d.max(above).max(below);
    }
    Ok(d)
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample<T: Real>(a: &[T], b: &[T]) -> Result<T> {
    let a = sorted_finite(a)?;
    let b = sorted_finite(b)?;
    let (na, nb) = (T::from_count(a.len()), T::from_count(b.len()));
    let (mut i, mut j) = (0, 0);
    let mut d = T::zero();
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((T::from_count(i) / na - T::from_count(j) / nb).abs());
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityComparison<T> {
    pub histogram: Histogram<T>,
    /// `(z, p_Z(z))` on the requested grid; `None` without closed-form
    /// densities.
    pub oracle: Option<Vec<(T, T)>>,
    pub ks_distance: Option<T>,
}

impl<T: Real> DensityComparison<T> {
    pub fn write_curve_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "z,p_oracle")?;
        for &(z, p) in self.oracle.iter().flatten() {
            writeln!(out, "{},{}", format_real(z), format_real(p))?;
        }
        Ok(())
    }
}

/// Histogram of `samples`, the quadrature density on `z_grid`, and the
/// one-sample KS distance against the quadrature CDF.
pub fn density_compare<T: Real>(
    position: &ProcessSpec<T>,
    time_process: &ProcessSpec<T>,
    t: T,
    x0: T,
    samples: &[T],
    z_grid: &[T],
    quad: &QuadratureRule<T>,
) -> Result<DensityComparison<T>> {
    let histogram = Histogram::from_samples(samples)?;
    let supported = iterated_density(position, time_process, t, x0, x0, quad);
    match supported {
        Err(Error::Unsupported { .. }) => {
            return Ok(DensityComparison {
                histogram,
                oracle: None,
                ks_distance: None,
            })
        }
        Err(e) => return Err(e),
        Ok(_) => {}
    }
    let oracle = z_grid
        .par_iter()
        .map(|&z| iterated_density(position, time_process, t, x0, z, quad).map(|p| (z, p)))
        .collect::<Result<Vec<_>>>()?;
    let ks = ks_one_sample(samples, |z| iterated_cdf(position, time_process, t, x0, z, quad))?;
    Ok(DensityComparison {
        histogram,
        oracle: Some(oracle),
        ks_distance: Some(ks),
    })
}

/// Strong-error measurements per level.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCurve<T> {
    pub levels: Vec<usize>,
    /// Mean of `error^{2p}` per level.
    pub errors: Vec<T>,
    pub p: T,
    pub n_paths: usize,
}

impl<T: Real> ErrorCurve<T> {
    pub fn new(levels: Vec<usize>, errors: Vec<T>, p: T, n_paths: usize) -> Result<Self> {
        if levels.len() != errors.len() {
            return Err(Error::invalid("errors", "one error per level"));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("levels", "must be strictly increasing"));
        }
        if !(p > T::zero()) {
            return Err(Error::invalid("p", "must be positive"));
        }
        Ok(Self {
            levels,
            errors,
            p,
            n_paths,
        })
    }

    pub fn is_strictly_decreasing(&self) -> bool {
        self.errors.windows(2).all(|w| w[1] < w[0])
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "n,error_moment,p,n_paths")?;
        for (n, e) in self.levels.iter().zip(&self.errors) {
            writeln!(out, "{},{},{},{}", n, format_real(*e), format_real(self.p), self.n_paths)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct StrongErrorConfig<T> {
    pub horizon: T,
    pub levels: Vec<usize>,
    pub ref_multiplier: usize,
    pub n_paths: usize,
    pub p: T,
    pub master_seed: u64,
}

/// Sup-knot errors `max_k |Z^n(t_k) - Z^ref(t_k)|` of every level on a
/// shared Brownian substrate, one row per path. Each row ends with the
/// reference level compared against itself.
///
/// `Y` is driven by the reference-level increments, aggregated for coarser
/// levels. `X` reads a fine Brownian path on `[0, H]`, `H = 4 sqrt(T)`
/// initially (doubled once if a realized `M_n` exceeds it), linearly
/// interpolated at each level's own grid.
pub fn coupled_errors<T, P, Q>(position: &P, time_process: &Q, cfg: &StrongErrorConfig<T>) -> Result<Vec<Vec<T>>>
where
    T: Real,
    P: ToCoefficients<T> + ?Sized,
    Q: ToCoefficients<T> + ?Sized,
{
    let x_field = position.to_coefficients()?;
    let y_field = time_process.to_coefficients()?;
    x_field.require_scalar("strong_error")?;
    y_field.require_scalar("strong_error")?;
    if cfg.levels.is_empty() || cfg.levels.contains(&0) {
        return Err(Error::invalid("levels", "need at least one positive level"));
    }
    if cfg.levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("levels", "must be strictly increasing"));
    }
    if cfg.ref_multiplier < 8 {
        return Err(Error::invalid("ref_multiplier", "must be at least 8"));
    }
    if !(cfg.horizon > T::zero()) {
        return Err(Error::invalid("T", "must be positive"));
    }
    if cfg.n_paths == 0 {
        return Err(Error::invalid("n_paths", "need at least 1 path"));
    }
    let max_level = *cfg.levels.last().expect("nonempty");
    let reference = cfg.ref_multiplier * max_level;
    let headroom = T::lit(4.0) * cfg.horizon.sqrt();
    let seed = cfg.master_seed;

    let rows: Vec<Result<Vec<T>>> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|k| {
            let mut ts = RngStream::derive_lane(seed, k, TIME_LANE);
            let dt = (cfg.horizon / T::from_count(reference)).sqrt();
            let fine: Vec<T> = (0..reference).map(|_| ts.standard_gaussian::<T>() * dt).collect();
            let mut inner = Vec::with_capacity(cfg.levels.len() + 1);
            for &n in cfg.levels.iter().chain(std::iter::once(&reference)) {
                let incs: Vec<T> = fine.chunks(reference / n).map(|c| c.iter().copied().sum()).collect();
                let path = euler_path_with_increments(&y_field, &[T::zero()], T::zero(), cfg.horizon, &incs)?;
                let m_n = path.sup_abs();
                inner.push((n, path, m_n));
            }
            let realized = inner.iter().map(|(_, _, m)| *m).fold(T::zero(), T::max);
            let mut h = headroom;
            let mut lane = POSITION_LANE;
            if realized > h {
                h *= T::lit(2.0);
                lane = RETRY_LANE;
            }
            if realized > h {
                return Err(Error::HeadroomExceeded {
                    realized: realized.as_f64(),
                    headroom: h.as_f64(),
                });
            }
            let substrate_steps = SUBSTRATE_FACTOR * reference;
            let mut ps = RngStream::derive_lane(seed, k, lane);
            let ds = (h / T::from_count(substrate_steps)).sqrt();
            let mut w = Vec::with_capacity(substrate_steps + 1);
            w.push(T::zero());
            for _ in 0..substrate_steps {
                let last = *w.last().expect("nonempty");
                w.push(last + ps.standard_gaussian::<T>() * ds);
            }
            let w_at = |s: T| {
                let pos = s / h * T::from_count(substrate_steps);
                let i = pos.floor().to_usize().unwrap_or(0).min(substrate_steps - 1);
                let frac = pos - T::from_count(i);
                w[i] + (w[i + 1] - w[i]) * frac
            };
            let knots = inner
                .iter()
                .map(|(n, path, m_n)| {
                    if *m_n == T::zero() {
                        return Ok(vec![T::zero(); n + 1]);
                    }
                    let tau = |j: usize| *m_n * T::from_count(j) / T::from_count(*n);
                    let incs: Vec<T> = (0..*n).map(|j| w_at(tau(j + 1)) - w_at(tau(j))).collect();
                    let outer = euler_path_with_increments(&x_field, &[T::zero()], T::zero(), *m_n, &incs)?;
                    Ok(compose_knots(path.values(), outer.values(), *m_n))
                })
                .collect::<Result<Vec<Vec<T>>>>()?;
            let reference_knots = knots.last().expect("reference level");
            Ok(cfg
                .levels
                .iter()
                .chain(std::iter::once(&reference))
                .zip(&knots)
                .map(|(&n, coarse)| {
                    let stride = reference / n;
                    coarse
                        .iter()
                        .enumerate()
                        .map(|(j, &z)| (z - reference_knots[j * stride]).abs())
                        .fold(T::zero(), T::max)
                })
                .collect())
        })
        .collect();
    rows.into_iter().collect()
}

/// Mean of `sup-error^{2p}` per level over coupled paths.
pub fn strong_error<T, P, Q>(position: &P, time_process: &Q, cfg: &StrongErrorConfig<T>) -> Result<ErrorCurve<T>>
where
    T: Real,
    P: ToCoefficients<T> + ?Sized,
    Q: ToCoefficients<T> + ?Sized,
{
    if !(cfg.p > T::zero()) {
        return Err(Error::invalid("p", "must be positive"));
    }
    let rows = coupled_errors(position, time_process, cfg)?;
    let exponent = T::lit(2.0) * cfg.p;
    let n = T::from_count(rows.len());
    let errors = (0..cfg.levels.len())
        .map(|i| rows.iter().map(|r| r[i].powf(exponent)).sum::<T>() / n)
        .collect();
    ErrorCurve::new(cfg.levels.clone(), errors, cfg.p, cfg.n_paths)
}

/// Least-squares fit of `log(error^{1/2p}) = intercept + alpha log(1/n)`;
/// returns `(alpha, intercept)`.
pub fn fit_order<T: Real>(curve: &ErrorCurve<T>) -> Result<(T, T)> {
    if curve.levels.len() < 3 {
        return Err(Error::invalid("levels", "need at least 3 levels to fit an order"));
    }
    if let Some(e) = curve.errors.iter().find(|e| !(**e > T::zero()) || !e.is_finite()) {
        return Err(Error::invalid("errors", format!("must be positive and finite, got {e}")));
    }
    let scale = T::one() / (T::lit(2.0) * curve.p);
    let xs: Vec<T> = curve.levels.iter().map(|&n| -T::from_count(n).ln()).collect();
    let ys: Vec<T> = curve.errors.iter().map(|e| e.ln() * scale).collect();
    let m = T::from_count(xs.len());
    let mx = xs.iter().copied().sum::<T>() / m;
    let my = ys.iter().copied().sum::<T>() / m;
    let sxy = xs.iter().zip(&ys).map(|(&x, &y)| (x - mx) * (y - my)).sum::<T>();
    let sxx = xs.iter().map(|&x| (x - mx) * (x - mx)).sum::<T>();
    let alpha = sxy / sxx;
    Ok((alpha, my - alpha * mx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::CoefficientField;

    fn bm() -> ProcessSpec<f64> {
        ProcessSpec::standard_brownian()
    }

    #[test]
    fn histogram_counts_and_edges() {
        let samples: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        let h = Histogram::from_samples(&samples).unwrap();
        assert_eq!(h.counts().iter().sum::<usize>(), 1000);
        assert_eq!(h.total(), 1000);
        assert!(h.edges().windows(2).all(|w| w[0] < w[1]));
        let area: f64 = h.density().iter().zip(h.edges().windows(2)).map(|(d, w)| d * (w[1] - w[0])).sum();
        assert!((area - 1.0).abs() < 1e-12);
        let flat = Histogram::from_samples(&[2.0_f64; 5]).unwrap();
        assert_eq!(flat.counts(), &[5]);
        assert!(Histogram::<f64>::from_samples(&[]).is_err());
        assert!(Histogram::with_edges(vec![0.0, 1.0], &[2.0]).is_err());
        let mut csv = Vec::new();
        Histogram::with_edges(vec![0.0, 0.5, 1.0], &[0.1, 0.5, 1.0]).unwrap().write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("bin_left,bin_right,count\n"));
        assert!(text.trim_end().ends_with(",2"));
    }

    #[test]
    fn deterministic_line_variation() {
        let c = 1.5_f64;
        let line = CoefficientField::constant(c, 0.0);
        let clock = CoefficientField::constant(1.0, 0.0);
        for q in [1u32, 2, 3, 4] {
            let est = variation_estimate(&line, &clock, q, 2.0, &McConfig::new(4, 64, 0)).unwrap();
            let exact = c.powi(q as i32) * 2.0_f64.powi(q as i32) / 64.0_f64.powi(q as i32 - 1);
            assert!((est.mean - exact).abs() <= 1e-12 * exact, "q={q}: {} vs {exact}", est.mean);
        }
    }

    #[test]
    fn quadratic_variation_without_iteration() {
        let clock = CoefficientField::constant(1.0, 0.0);
        let est = variation_estimate(&bm(), &clock, 2, 1.0, &McConfig::new(500, 1000, 2)).unwrap();
        assert!(est.z_score(1.0) < 3.0, "{est:?}");
        let q4 = variation_estimate(&bm(), &clock, 4, 1.0, &McConfig::new(200, 1000, 2)).unwrap();
        assert!(q4.mean < 0.01);
    }

    #[test]
    fn density_normalized_and_symmetric() {
        let q = QuadratureRule::default();
        let p = |z: f64| iterated_density(&bm(), &bm(), 1.0, 0.0, z, &q).unwrap();
        for z in [0.1, 0.5, 1.3, 3.0] {
            assert!((p(z) - p(-z)).abs() < 1e-10);
        }
        let mass = q.try_integrate_split(-12.0, 12.0, &[0.0], |z| Ok(p(z))).unwrap();
        assert!((mass - 1.0).abs() < 1e-4, "{mass}");
        let cdf0 = iterated_cdf(&bm(), &bm(), 1.0, 0.0, 0.0, &q).unwrap();
        assert!((cdf0 - 0.5).abs() < 1e-10);
    }

    #[test]
    fn other_densities_normalized() {
        let q = QuadratureRule::default();
        let bmd = ProcessSpec::brownian_with_drift(0.5, 0.8).unwrap();
        let pairs = [
            (bm(), ProcessSpec::OrnsteinUhlenbeck),
            (bmd, bm()),
            (bm(), bmd),
            (ProcessSpec::CauchyProcess, bm()),
            (bm(), ProcessSpec::CauchyProcess),
        ];
        for (x, y) in pairs {
            let mass = q.try_integrate_split(-60.0, 60.0, &[-5.0, -1.0, 0.2, 1.0, 5.0], |z| iterated_density(&x, &y, 1.0, 0.2, z, &q)).unwrap();
            let tails = 1.0 - iterated_cdf(&x, &y, 1.0, 0.2, 60.0, &q).unwrap() + iterated_cdf(&x, &y, 1.0, 0.2, -60.0, &q).unwrap();
            assert!((mass + tails - 1.0).abs() < 1e-4, "{x} / {y}: {mass} + {tails}");
        }
    }

    #[test]
    fn ks_distances() {
        let uniform: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        let d = ks_one_sample(&uniform, Ok).unwrap();
        assert!((d - 0.005).abs() < 1e-12);
        assert_eq!(ks_two_sample(&uniform, &uniform).unwrap(), 0.0);
        assert_eq!(ks_two_sample(&[0.0, 1.0], &[2.0, 3.0]).unwrap(), 1.0);
        assert!(ks_one_sample::<f64, _>(&[], Ok).is_err());
    }

    #[test]
    fn unsupported_oracle_is_omitted() {
        let q = QuadratureRule::with_nodes(32).unwrap();
        let sq = ProcessSpec::squared_bessel(2.0).unwrap();
        let cmp = density_compare(&sq, &bm(), 1.0, 1.0, &[0.5, 1.0, 1.5], &[1.0], &q).unwrap();
        assert!(cmp.oracle.is_none() && cmp.ks_distance.is_none());
        assert_eq!(cmp.histogram.total(), 3);
    }

    #[test]
    fn fit_order_exact_on_synthetic_data() {
        let levels = vec![16, 32, 64, 128, 256];
        for (alpha, p) in [(0.5, 0.5), (0.25, 0.5), (0.25, 1.0), (0.7, 2.0)] {
            let errors = levels.iter().map(|&n| (3.0 * (n as f64).powf(-alpha)).powf(2.0 * p)).collect();
            let curve = ErrorCurve::new(levels.clone(), errors, p, 10).unwrap();
            let (a, b) = fit_order(&curve).unwrap();
            assert!((a - alpha).abs() < 1e-9, "{a} vs {alpha}");
            assert!((b - 3.0_f64.ln()).abs() < 1e-9);
        }
        let bad = ErrorCurve::new(vec![1, 2, 3], vec![1.0, 0.0, 1.0], 1.0, 1).unwrap();
        assert!(fit_order(&bad).is_err());
        let short = ErrorCurve::new(vec![1, 2], vec![1.0, 0.5], 1.0, 1).unwrap();
        assert!(fit_order(&short).is_err());
    }

    fn config(levels: Vec<usize>, n_paths: usize) -> StrongErrorConfig<f64> {
        StrongErrorConfig {
            horizon: 1.0,
            levels,
            ref_multiplier: 8,
            n_paths,
            p: 1.0,
            master_seed: 11,
        }
    }

    #[test]
    fn reference_level_has_zero_error() {
        let rows = coupled_errors(&bm(), &bm(), &config(vec![4, 32], 5)).unwrap();
        assert_eq!(rows.len(), 5);
        for row in rows {
            assert_eq!(row.len(), 3);
            assert_eq!(row[2], 0.0);
            assert!(row[0] > 0.0);
        }
    }

    #[test]
    fn deterministic_errors_decrease() {
        let x = CoefficientField::constant(1.0, 0.0);
        let y = CoefficientField::scalar(|_, y: f64| 1.0 + y, |_, _| 0.0);
        let curve = strong_error(&x, &y, &config(vec![4, 8, 16, 32], 2)).unwrap();
        assert!(curve.is_strictly_decreasing(), "{curve:?}");
        assert!(curve.errors.iter().all(|&e| e > 0.0));
    }

    #[test]
    fn strong_error_rejects_bad_levels() {
        assert!(strong_error(&bm(), &bm(), &config(vec![], 2)).is_err());
        assert!(strong_error(&bm(), &bm(), &config(vec![8, 4], 2)).is_err());
        let mut cfg = config(vec![4, 8], 2);
        cfg.ref_multiplier = 4;
        assert!(strong_error(&bm(), &bm(), &cfg).is_err());
    }

    #[test]
    fn strong_error_independent_of_threads() {
        let job = || strong_error(&bm(), &bm(), &config(vec![4, 8, 16], 20)).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(job);
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(job);
        assert_eq!(one, three);
    }
}
