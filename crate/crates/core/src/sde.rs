//! Time-inhomogeneous Euler-Maruyama engine.
//!
//! ```text
//! X_{k+1} = X_k + b(t_k, X_k) dt + sigma(t_k, X_k) dW_k,   dW_k ~ N(0, dt I_p)
//! ```
//!
//! The resulting [`EulerPath`] can be read back either as the left-continuous
//! step function through its knots or as the piecewise-linear interpolant.

use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rng::{RngStream, StreamId};
use crate::scalar::{format_real, Real};

/// `(t, x, out)`: writes `d` drift components, or the `d x p` diffusion
/// matrix in row-major order, into `out`.
pub type VectorField<T> = dyn Fn(T, &[T], &mut [T]) + Send + Sync;

#[derive(Clone)]
pub struct CoefficientField<T> {
    dim_state: usize,
    dim_noise: usize,
    drift: Arc<VectorField<T>>,
    diffusion: Arc<VectorField<T>>,
    lipschitz_hint: Option<T>,
    holder_hint: Option<T>,
}

impl<T: Real> CoefficientField<T> {
    pub fn new<B, S>(dim_state: usize, dim_noise: usize, drift: B, diffusion: S) -> Result<Self>
    where
        B: Fn(T, &[T], &mut [T]) + Send + Sync + 'static,
        S: Fn(T, &[T], &mut [T]) + Send + Sync + 'static,
    {
        if dim_state == 0 {
            return Err(Error::invalid("dim_state", "must be at least 1"));
        }
        if dim_noise == 0 {
            return Err(Error::invalid("dim_noise", "must be at least 1"));
        }
        Ok(Self {
            dim_state,
            dim_noise,
            drift: Arc::new(drift),
            diffusion: Arc::new(diffusion),
            lipschitz_hint: None,
            holder_hint: None,
        })
    }

    /// One-dimensional SDE `dX = b(t,X) dt + sigma(t,X) dW`.
    pub fn scalar<B, S>(drift: B, diffusion: S) -> Self
    where
        B: Fn(T, T) -> T + Send + Sync + 'static,
        S: Fn(T, T) -> T + Send + Sync + 'static,
    {
        Self {
            dim_state: 1,
            dim_noise: 1,
            drift: Arc::new(move |t, x: &[T], out: &mut [T]| out[0] = drift(t, x[0])),
            diffusion: Arc::new(move |t, x: &[T], out: &mut [T]| out[0] = diffusion(t, x[0])),
            lipschitz_hint: None,
            holder_hint: None,
        }
    }

    /// Constant coefficients `b` and `sigma` (a scaled Brownian motion with drift).
    pub fn constant(drift: T, diffusion: T) -> Self {
        Self::scalar(move |_, _| drift, move |_, _| diffusion)
    }

    pub fn with_lipschitz_hint(mut self, k: T) -> Result<Self> {
        if !(k > T::zero()) {
            return Err(Error::invalid("lipschitz_hint", "must be positive"));
        }
        self.lipschitz_hint = Some(k);
        Ok(self)
    }

    pub fn with_holder_hint(mut self, beta: T) -> Result<Self> {
        if !(beta > T::zero()) {
            return Err(Error::invalid("holder_hint", "must be positive"));
        }
        self.holder_hint = Some(beta);
        Ok(self)
    }

    pub fn dim_state(&self) -> usize {
        self.dim_state
    }

    pub fn dim_noise(&self) -> usize {
        self.dim_noise
    }

    pub fn lipschitz_hint(&self) -> Option<T> {
        self.lipschitz_hint
    }

    pub fn holder_hint(&self) -> Option<T> {
        self.holder_hint
    }

    pub fn drift_into(&self, t: T, x: &[T], out: &mut [T]) {
        (self.drift)(t, x, out)
    }

    pub fn diffusion_into(&self, t: T, x: &[T], out: &mut [T]) {
        (self.diffusion)(t, x, out)
    }

    /// Drift of a one-dimensional field.
    pub fn drift_scalar(&self, t: T, x: T) -> T {
        let mut out = [T::zero()];
        self.drift_into(t, std::slice::from_ref(&x), &mut out);
        out[0]
    }

    /// Diffusion of a one-dimensional field.
    pub fn diffusion_scalar(&self, t: T, x: T) -> T {
        let mut out = [T::zero()];
        self.diffusion_into(t, std::slice::from_ref(&x), &mut out);
        out[0]
    }

    pub(crate) fn require_scalar(&self, what: &'static str) -> Result<()> {
        if self.dim_state != 1 || self.dim_noise != 1 {
            return Err(Error::unsupported(
                what,
                format!(
                    "a {}x{} coefficient field (one-dimensional required)",
                    self.dim_state, self.dim_noise
                ),
            ));
        }
        Ok(())
    }
}

impl<T: fmt::Debug> fmt::Debug for CoefficientField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("dim_state", &self.dim_state)
            .field("dim_noise", &self.dim_noise)
            .field("lipschitz_hint", &self.lipschitz_hint)
            .field("holder_hint", &self.holder_hint)
            .finish_non_exhaustive()
    }
}

/// Knots of an Euler approximation on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerPath<T> {
    t0: T,
    horizon: T,
    steps: usize,
    dim: usize,
    values: Vec<T>,
    driving_stream: Option<StreamId>,
}

impl<T: Real> EulerPath<T> {
    /// Builds a path from raw knot values (`(steps + 1) * dim` entries, row-major).
    pub fn from_values(t0: T, horizon: T, dim: usize, values: Vec<T>) -> Result<Self> {
        if dim == 0 || values.len() < 2 * dim || !values.len().is_multiple_of(dim) {
            return Err(Error::invalid(
                "values",
                "need at least two knots of the given dimension",
            ));
        }
        check_interval(t0, horizon)?;
        Ok(Self {
            t0,
            horizon,
            steps: values.len() / dim - 1,
            dim,
            values,
            driving_stream: None,
        })
    }

    pub fn t0(&self) -> T {
        self.t0
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mesh(&self) -> T {
        (self.horizon - self.t0) / T::from_count(self.steps)
    }

    pub fn driving_stream(&self) -> Option<StreamId> {
        self.driving_stream
    }

    /// `t_k = t0 + k (T - t0) / n`; the last knot is exactly `T`.
    pub fn time(&self, k: usize) -> T {
        grid_time(self.t0, self.horizon, self.steps, k)
    }

    pub fn value(&self, k: usize) -> &[T] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    /// First component at knot `k`.
    pub fn scalar(&self, k: usize) -> T {
        self.values[k * self.dim]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// First component at every knot.
    pub fn scalars(&self) -> impl Iterator<Item = T> + '_ {
        self.values.iter().step_by(self.dim).copied()
    }

    fn locate(&self, t: T) -> Result<(usize, T)> {
        if !(t >= self.t0 && t <= self.horizon) {
            return Err(Error::OutOfRange {
                what: "t",
                value: t.as_f64(),
                lower: self.t0.as_f64(),
                upper: self.horizon.as_f64(),
            });
        }
        if t == self.horizon {
            return Ok((self.steps, T::zero()));
        }
        let pos = (t - self.t0) / self.mesh();
        let mut k = pos.floor().to_usize().unwrap_or(0).min(self.steps - 1);
        // Rounding in `pos` must not move t across a knot.
        while k > 0 && self.time(k) > t {
            k -= 1;
        }
        while k + 1 < self.steps && self.time(k + 1) <= t {
            k += 1;
        }
        let frac = (t - self.time(k)) / (self.time(k + 1) - self.time(k));
        Ok((k, frac))
    }

    /// Left-continuous step interpolant: `values[k]` on `[t_k, t_{k+1})`.
    pub fn eval_step(&self, t: T) -> Result<&[T]> {
        let (k, _) = self.locate(t)?;
        Ok(self.value(k))
    }

    /// Piecewise-linear interpolant through the knots.
    pub fn eval_linear(&self, t: T) -> Result<Vec<T>> {
        let (k, frac) = self.locate(t)?;
        if k == self.steps || frac == T::zero() {
            return Ok(self.value(k).to_vec());
        }
        Ok(self
            .value(k)
            .iter()
            .zip(self.value(k + 1))
            .map(|(&a, &b)| a + frac * (b - a))
            .collect())
    }

    /// Largest Euclidean norm over the knots, which is the supremum of the
    /// linear interpolant.
    pub fn sup_abs(&self) -> T {
        self.values
            .chunks(self.dim)
            .map(euclidean_norm)
            .fold(T::zero(), T::max)
    }

    /// CSV with header `t,x_1,...,x_d`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let header: Vec<String> = (1..=self.dim).map(|i| format!("x_{i}")).collect();
        writeln!(out, "t,{}", header.join(","))?;
        for k in 0..=self.steps {
            let row: Vec<String> = self.value(k).iter().map(|&v| format_real(v)).collect();
            writeln!(out, "{},{}", format_real(self.time(k)), row.join(","))?;
        }
        Ok(())
    }
}

/// Knot `k` of the uniform `n`-step grid on `[t0, T]`, computed as
/// `t0 + (k (T - t0)) / n` so that constant-drift runs reproduce the grid.
pub(crate) fn grid_time<T: Real>(t0: T, horizon: T, steps: usize, k: usize) -> T {
    if k == steps {
        horizon
    } else {
        t0 + T::from_count(k) * (horizon - t0) / T::from_count(steps)
    }
}

pub(crate) fn euclidean_norm<T: Real>(x: &[T]) -> T {
    if let [v] = x {
        return v.abs();
    }
    x.iter().map(|&v| v * v).sum::<T>().sqrt()
}

fn check_interval<T: Real>(t0: T, horizon: T) -> Result<()> {
    if !(t0.is_finite() && horizon.is_finite() && horizon > t0) {
        return Err(Error::invalid(
            "T",
            format!("need a finite interval with T > t0, got [{t0}, {horizon}]"),
        ));
    }
    Ok(())
}

/// Runs the Euler recursion with increments supplied by `noise`, which
/// fills `dW_k` (already scaled by `sqrt(dt)`) for step `k`. `visit` sees
/// every knot `(k, t_k, x_k)`, `k = 0..=n`. Returns the terminal state.
pub(crate) fn integrate<T, N, V>(
    coeffs: &CoefficientField<T>,
    x0: &[T],
    t0: T,
    horizon: T,
    steps: usize,
    mut noise: N,
    mut visit: V,
) -> Result<Vec<T>>
where
    T: Real,
    N: FnMut(usize, &mut [T]),
    V: FnMut(usize, T, &[T]),
{
    if steps == 0 {
        return Err(Error::invalid("n", "step count must be at least 1"));
    }
    check_interval(t0, horizon)?;
    let (d, p) = (coeffs.dim_state, coeffs.dim_noise);
    if x0.len() != d {
        return Err(Error::invalid(
            "x0",
            format!("expected {d} components, got {}", x0.len()),
        ));
    }
    let mut x = x0.to_vec();
    let mut drift = vec![T::zero(); d];
    let mut diffusion = vec![T::zero(); d * p];
    let mut dw = vec![T::zero(); p];
    visit(0, t0, &x);
    let mut t = t0;
    for k in 0..steps {
        // Per-step widths: with x_k = t_k the drift update lands exactly on
        // t_{k+1}, since adjacent knots subtract exactly.
        let t_next = grid_time(t0, horizon, steps, k + 1);
        let dt = t_next - t;
        coeffs.drift_into(t, &x, &mut drift);
        coeffs.diffusion_into(t, &x, &mut diffusion);
        if drift.iter().chain(&diffusion).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteCoefficient { step: k });
        }
        noise(k, &mut dw);
        for i in 0..d {
            let row = &diffusion[i * p..(i + 1) * p];
            let shock = row.iter().zip(&dw).map(|(&s, &w)| s * w).sum::<T>();
            x[i] += drift[i] * dt + shock;
        }
        visit(k + 1, t_next, &x);
        t = t_next;
    }
    Ok(x)
}

/// Euler path on `[0, T]` with `n` steps driven by `stream`.
///
/// `p` Gaussians are drawn per step even where the diffusion vanishes, so
/// runs with different coefficients on the same stream stay coupled.
pub fn euler_path<T: Real>(
    coeffs: &CoefficientField<T>,
    x0: &[T],
    horizon: T,
    steps: usize,
    stream: &mut RngStream,
) -> Result<EulerPath<T>> {
    let id = stream.id();
    let mut path = euler_path_from(coeffs, x0, T::zero(), horizon, steps, |_, dw| {
        let scale = (horizon / T::from_count(steps)).sqrt();
        for w in dw.iter_mut() {
            *w = stream.standard_gaussian::<T>() * scale;
        }
    })?;
    path.driving_stream = Some(id);
    Ok(path)
}

/// Euler path on `[t0, T]` driven by externally supplied Brownian increments.
pub fn euler_path_with_increments<T: Real>(
    coeffs: &CoefficientField<T>,
    x0: &[T],
    t0: T,
    horizon: T,
    increments: &[T],
) -> Result<EulerPath<T>> {
    let p = coeffs.dim_noise;
    if increments.is_empty() || !increments.len().is_multiple_of(p) {
        return Err(Error::invalid(
            "increments",
            format!("length must be a positive multiple of dim_noise = {p}"),
        ));
    }
    let steps = increments.len() / p;
    euler_path_from(coeffs, x0, t0, horizon, steps, |k, dw| {
        dw.copy_from_slice(&increments[k * p..(k + 1) * p])
    })
}

fn euler_path_from<T: Real, N: FnMut(usize, &mut [T])>(
    coeffs: &CoefficientField<T>,
    x0: &[T],
    t0: T,
    horizon: T,
    steps: usize,
    noise: N,
) -> Result<EulerPath<T>> {
    let d = coeffs.dim_state;
    let mut values = Vec::with_capacity((steps + 1) * d);
    integrate(coeffs, x0, t0, horizon, steps, noise, |_, _, x| {
        values.extend_from_slice(x)
    })?;
    Ok(EulerPath {
        t0,
        horizon,
        steps,
        dim: d,
        values,
        driving_stream: None,
    })
}

/// Terminal value of a one-dimensional Euler run on `[0, T]`; `T = 0`
/// returns `x0` without drawing.
pub(crate) fn euler_terminal<T: Real>(
    coeffs: &CoefficientField<T>,
    x0: T,
    horizon: T,
    steps: usize,
    stream: &mut RngStream,
) -> Result<T> {
    if horizon == T::zero() {
        return Ok(x0);
    }
    let scale = (horizon / T::from_count(steps.max(1))).sqrt();
    let x = integrate(
        coeffs,
        &[x0],
        T::zero(),
        horizon,
        steps,
        |_, dw| {
            for w in dw.iter_mut() {
                *w = stream.standard_gaussian::<T>() * scale;
            }
        },
        |_, _, _| {},
    )?;
    Ok(x[0])
}
