//! Composition schemes for iterated processes `Z_t = X(|Y_t|)`.
//!
//! The time process `Y` is discretized with `n` Euler steps on `[0, T]`.
//! Writing `M_n` for the largest `|Y|` over the grid, the position process
//! `X` gets `n` Euler steps on `[0, M_n]`. Both are read as step functions
//! and the composed knots
//!
//! ```text
//! Z(kT/n) = X( (M_n/n) floor( (n/M_n) |Y(kT/n)| ) ),   k = 0..=n
//! ```
//!
//! are joined linearly.

use std::io::{self, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::processes::ToCoefficients;
use crate::rng::{RngStream, StreamId};
use crate::scalar::{format_real, Real};
use crate::sde::{euler_path, integrate, CoefficientField, EulerPath};

/// Index of the outer knot read by the floor composition.
///
/// Values within a few ulps of an integer are snapped to it, so that time
/// grids accumulated by repeated addition of a non-dyadic mesh do not fall
/// one knot short.
pub fn floor_index<T: Real>(abs_y: T, m_n: T, n: usize) -> usize {
    if !(m_n > T::zero()) {
        return 0;
    }
    let scaled = (abs_y / m_n).min(T::one()) * T::from_count(n);
    let nearest = scaled.round();
    let tolerance = T::lit(64.0) * T::epsilon() * nearest.max(T::one());
    let idx = if (scaled - nearest).abs() <= tolerance {
        nearest
    } else {
        scaled.floor()
    };
    idx.to_usize().unwrap_or(0).min(n)
}

/// Composes step-function knots `inner` (the time process) with `outer`
/// (the position process on `[0, m_n]`).
pub fn compose_knots<T: Real>(inner: &[T], outer: &[T], m_n: T) -> Vec<T> {
    let n_outer = outer.len() - 1;
    inner
        .iter()
        .map(|&y| outer[floor_index(y.abs(), m_n, n_outer)])
        .collect()
}

#[derive(Debug, Clone)]
pub struct IteratedPath<T> {
    horizon: T,
    level: usize,
    knots: Vec<T>,
    m_n: T,
    x0: T,
    inner: EulerPath<T>,
    outer: Option<EulerPath<T>>,
}

impl<T: Real> IteratedPath<T> {
    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    pub fn terminal(&self) -> T {
        self.knots[self.level]
    }

    /// `M_n`, the largest `|Y|` over the inner grid.
    pub fn m_n(&self) -> T {
        self.m_n
    }

    pub fn inner_path(&self) -> &EulerPath<T> {
        &self.inner
    }

    /// `None` in the degenerate case `M_n = 0`, where `Z` is constant.
    pub fn outer_path(&self) -> Option<&EulerPath<T>> {
        self.outer.as_ref()
    }

    pub fn streams(&self) -> (Option<StreamId>, Option<StreamId>) {
        (
            self.inner.driving_stream(),
            self.outer.as_ref().and_then(EulerPath::driving_stream),
        )
    }

    pub fn time(&self, k: usize) -> T {
        self.inner.time(k)
    }

    /// Outer knot index used for composed knot `k`.
    pub fn floor_index(&self, k: usize) -> usize {
        floor_index(self.inner.scalar(k).abs(), self.m_n, self.level)
    }

    /// Recomputes knot `k` from the stored inner and outer paths.
    pub fn recompose(&self, k: usize) -> T {
        match &self.outer {
            None => self.x0,
            Some(outer) => {
                let y = self.inner.eval_step(self.inner.time(k)).expect("grid time")[0];
                let idx = floor_index(y.abs(), self.m_n, self.level);
                outer
                    .eval_step(outer.time(idx))
                    .expect("outer grid time")[0]
            }
        }
    }

    /// Linear interpolation between the composed knots.
    pub fn eval(&self, t: T) -> Result<T> {
        if !(t >= T::zero() && t <= self.horizon) {
            return Err(Error::OutOfRange {
                what: "t",
                value: t.as_f64(),
                lower: 0.0,
                upper: self.horizon.as_f64(),
            });
        }
        let lifted = EulerPath::from_values(T::zero(), self.horizon, 1, self.knots.clone())?;
        Ok(lifted.eval_linear(t)?[0])
    }

    /// `t,z` rows at the knots, preceded by `#`-prefixed metadata.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let fmt_id = |id: Option<StreamId>| match id {
            Some(id) => format!("{}:{}:{}", id.master_seed, id.stream_index, id.lane),
            None => "none".to_string(),
        };
        let (inner_id, outer_id) = self.streams();
        writeln!(out, "# n={}", self.level)?;
        writeln!(out, "# T={}", format_real(self.horizon))?;
        writeln!(out, "# M_n={}", format_real(self.m_n))?;
        writeln!(out, "# time_stream={}", fmt_id(inner_id))?;
        writeln!(out, "# position_stream={}", fmt_id(outer_id))?;
        writeln!(out, "t,z")?;
        for (k, z) in self.knots.iter().enumerate() {
            writeln!(out, "{},{}", format_real(self.time(k)), format_real(*z))?;
        }
        Ok(())
    }
}

/// Simulates the composed approximation of `X(|Y|)` on `[0, T]` at level `n`.
///
/// `time_stream` drives `Y`, `position_stream` drives `X`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_iterated<T, P, Q>(
    position: &P,
    time_process: &Q,
    x0: T,
    y0: T,
    horizon: T,
    n: usize,
    time_stream: &mut RngStream,
    position_stream: &mut RngStream,
) -> Result<IteratedPath<T>>
where
    T: Real,
    P: ToCoefficients<T> + ?Sized,
    Q: ToCoefficients<T> + ?Sized,
{
    let x_field = position.to_coefficients()?;
    let y_field = time_process.to_coefficients()?;
    x_field.require_scalar("simulate_iterated")?;
    y_field.require_scalar("simulate_iterated")?;

    let inner = euler_path(&y_field, &[y0], horizon, n, time_stream)?;
    let m_n = inner.sup_abs();
    if m_n == T::zero() {
        return Ok(IteratedPath {
            horizon,
            level: n,
            knots: vec![x0; n + 1],
            m_n,
            x0,
            inner,
            outer: None,
        });
    }
    let outer = euler_path(&x_field, &[x0], m_n, n, position_stream)?;
    let knots = compose_knots(inner.values(), outer.values(), m_n);
    Ok(IteratedPath {
        horizon,
        level: n,
        knots,
        m_n,
        x0,
        inner,
        outer: Some(outer),
    })
}

pub type RateFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// Killing rates for the two branches of a two-sided process.
#[derive(Clone, Default)]
pub struct Killing<T> {
    pub plus: Option<RateFn<T>>,
    pub minus: Option<RateFn<T>>,
}

impl<T> Killing<T> {
    pub fn none() -> Self {
        Self {
            plus: None,
            minus: None,
        }
    }

    pub fn new(plus: Option<RateFn<T>>, minus: Option<RateFn<T>>) -> Self {
        Self { plus, minus }
    }

    pub fn is_none(&self) -> bool {
        self.plus.is_none() && self.minus.is_none()
    }
}

impl<T> std::fmt::Debug for Killing<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Killing")
            .field("plus", &self.plus.is_some())
            .field("minus", &self.minus.is_some())
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoSidedSample<T> {
    pub point: (T, T),
    pub weight: T,
}

/// One draw of the real-line-indexed process at signed time `s`.
///
/// For `s >= 0` the first coordinate moves along `X+` from `x1`; for `s < 0`
/// the second moves along `X-` from `x2` for time `-s`. The killing weight is
/// `exp(-I)` with `I` the left Riemann sum of the active branch's rate along
/// its Euler grid.
#[allow(clippy::too_many_arguments)]
pub fn two_sided_sample<T: Real>(
    xplus: &CoefficientField<T>,
    xminus: &CoefficientField<T>,
    x1: T,
    x2: T,
    s: T,
    n: usize,
    stream: &mut RngStream,
    killing: &Killing<T>,
) -> Result<TwoSidedSample<T>> {
    if !s.is_finite() {
        return Err(Error::NonFinite(format!("two-sided time s = {s}")));
    }
    if n == 0 {
        return Err(Error::invalid("n", "step count must be at least 1"));
    }
    if s == T::zero() {
        return Ok(TwoSidedSample {
            point: (x1, x2),
            weight: T::one(),
        });
    }
    let (field, start, duration, rate) = if s > T::zero() {
        (xplus, x1, s, killing.plus.as_ref())
    } else {
        (xminus, x2, -s, killing.minus.as_ref())
    };
    field.require_scalar("two_sided_sample")?;
    let dt = duration / T::from_count(n);
    let scale = dt.sqrt();
    let mut exposure = T::zero();
    let terminal = integrate(
        field,
        &[start],
        T::zero(),
        duration,
        n,
        |_, dw| {
            for w in dw.iter_mut() {
                *w = stream.standard_gaussian::<T>() * scale;
            }
        },
        |k, _, x| {
            if let (Some(c), true) = (rate, k < n) {
                exposure += c(x[0]) * dt;
            }
        },
    )?[0];
    let point = if s > T::zero() {
        (terminal, x2)
    } else {
        (x1, terminal)
    };
    Ok(TwoSidedSample {
        point,
        weight: (-exposure).exp(),
    })
}

/// `X(alpha(Y_t))`: `Y` by Euler on `[0, t]`, then `X` by Euler on
/// `[0, alpha(Y_t)]`, both with `n` steps.
#[allow(clippy::too_many_arguments)]
pub fn time_changed_value<T, A>(
    position: &CoefficientField<T>,
    time_process: &CoefficientField<T>,
    alpha: A,
    x0: T,
    y0: T,
    t: T,
    n: usize,
    time_stream: &mut RngStream,
    position_stream: &mut RngStream,
) -> Result<T>
where
    T: Real,
    A: Fn(T) -> T,
{
    position.require_scalar("time_changed_value")?;
    time_process.require_scalar("time_changed_value")?;
    if !(t >= T::zero()) {
        return Err(Error::OutOfRange {
            what: "t",
            value: t.as_f64(),
            lower: 0.0,
            upper: f64::INFINITY,
        });
    }
    let y_t = crate::sde::euler_terminal(time_process, y0, t, n, time_stream)?;
    let clock = alpha(y_t);
    if !clock.is_finite() {
        return Err(Error::NonFinite(format!("alpha(Y_t) = {clock} at Y_t = {y_t}")));
    }
    if clock < T::zero() {
        return Err(Error::invalid("alpha", format!("negative clock {clock}")));
    }
    crate::sde::euler_terminal(position, x0, clock, n, position_stream)
}
