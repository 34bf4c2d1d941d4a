//! Feynman-Kac representations for iterated processes.
//!
//! Monte Carlo estimators of `E f(X^x(|Y_t|))` and its two-sided and killed
//! variants, quadrature oracles built from closed-form densities, the
//! residual of the fourth-order heat equation solved by iterated Brownian
//! motion, intertwining transport between squared Bessel processes, and the
//! half-derivative transform.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::iterated::{two_sided_sample, Killing};
use crate::mc::{self, McConfig, MonteCarloEstimate};
use crate::processes::{Dynamics, ProcessSpec, ToCoefficients};
use crate::quadrature::QuadratureRule;
use crate::rng::{RngStream, POSITION_LANE};
use crate::scalar::{ln_beta, Real};

/// Lane used to derive per-node seeds in [`intertwine_check`].
const NODE_SEED_LANE: u64 = 2;

pub type ScalarFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// `a exp(-c (z - m)^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianForm<T> {
    pub amplitude: T,
    pub center: T,
    pub rate: T,
}

impl<T: Real> GaussianForm<T> {
    pub fn eval(&self, z: T) -> T {
        let d = z - self.center;
        self.amplitude * (-self.rate * d * d).exp()
    }

    /// `E[f(N(mean, sd^2))]` in closed form.
    pub fn gaussian_expectation(&self, mean: T, sd: T) -> T {
        let spread = T::one() + T::lit(2.0) * self.rate * sd * sd;
        let d = mean - self.center;
        self.amplitude * (-self.rate * d * d / spread).exp() / spread.sqrt()
    }
}

/// An initial datum `f`, optionally tagged with a Gaussian closed form so the
/// oracles can integrate it analytically.
#[derive(Clone)]
pub struct TestFunction<T> {
    eval: ScalarFn<T>,
    gaussian: Option<GaussianForm<T>>,
}

impl<T: Real> TestFunction<T> {
    pub fn custom<F: Fn(T) -> T + Send + Sync + 'static>(f: F) -> Self {
        Self {
            eval: Arc::new(f),
            gaussian: None,
        }
    }

    pub fn gaussian(amplitude: T, center: T, rate: T) -> Self {
        let form = GaussianForm {
            amplitude,
            center,
            rate,
        };
        Self {
            eval: Arc::new(move |z| form.eval(z)),
            gaussian: Some(form),
        }
    }

    /// `exp(-x^2)`.
    pub fn gauss() -> Self {
        Self::gaussian(T::one(), T::zero(), T::one())
    }

    pub fn constant(c: T) -> Self {
        Self::gaussian(c, T::zero(), T::zero())
    }

    /// Smooth bump `exp(-1 / (1 - u^2))`, `u = (2x - lo - hi) / (hi - lo)`,
    /// supported on `(lo, hi)`.
    pub fn bump(lo: T, hi: T) -> Self {
        Self::custom(move |x| bump(x, lo, hi))
    }

    pub fn eval(&self, x: T) -> T {
        (self.eval)(x)
    }

    pub fn gaussian_form(&self) -> Option<GaussianForm<T>> {
        self.gaussian
    }

    pub fn as_fn(&self) -> ScalarFn<T> {
        self.eval.clone()
    }
}

impl<T: Real> fmt::Debug for TestFunction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("gaussian", &self.gaussian)
            .finish_non_exhaustive()
    }
}

pub fn bump<T: Real>(x: T, lo: T, hi: T) -> T {
    let u = (T::lit(2.0) * x - lo - hi) / (hi - lo);
    if u.abs() >= T::one() {
        T::zero()
    } else {
        (-T::one() / (T::one() - u * u)).exp()
    }
}

fn positive_time<T: Real>(t: T) -> Result<()> {
    if t > T::zero() && t.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            what: "t",
            value: t.as_f64(),
            lower: 0.0,
            upper: f64::INFINITY,
        })
    }
}

/// Monte Carlo estimate of `v(t, x) = E f(X^x(|Y_t|))`, with `Y_0 = 0`.
///
/// Each process is sampled exactly when it has an exact sampler and by the
/// Euler scheme with `cfg.n_steps` steps otherwise.
pub fn fk_estimate<T, F>(
    position: &Dynamics<T>,
    time_process: &Dynamics<T>,
    f: F,
    t: T,
    x: T,
    cfg: &McConfig,
) -> Result<MonteCarloEstimate<T>>
where
    T: Real,
    F: Fn(T) -> T + Sync + Send,
{
    positive_time(t)?;
    cfg.validate()?;
    mc::run(cfg.n_paths, cfg.master_seed, |k| {
        let mut clock = RngStream::derive(cfg.master_seed, k);
        let mut motion = clock.sibling(POSITION_LANE);
        let y = time_process.sample(t, T::zero(), cfg.n_steps, &mut clock)?;
        let z = position.sample(y.abs(), x, cfg.n_steps, &mut motion)?;
        Ok(f(z))
    })
}

/// `E[g(|Y_t|)] = 2 int_0^inf E(p_Y)(t, 0, u) g(u) du`, with `E(p)` the even
/// part of the time density. `u_breaks` are points where `g` changes
/// quickly.
pub fn subordinate<T, G>(
    time_process: &ProcessSpec<T>,
    t: T,
    quad: &QuadratureRule<T>,
    u_breaks: &[T],
    mut g: G,
) -> Result<T>
where
    T: Real,
    G: FnMut(T) -> Result<T>,
{
    positive_time(t)?;
    // fails for time processes without a tabulated density
    time_process.transition_density(t, T::zero(), T::zero())?;
    if let ProcessSpec::CauchyProcess = time_process {
        // u = t tan(theta) turns p_C(t, 0, u) du into d(theta) / pi.
        let theta_breaks: Vec<T> = u_breaks.iter().map(|&u| (u / t).atan()).collect();
        let integral = quad.try_integrate_split(T::zero(), T::FRAC_PI_2(), &theta_breaks, |theta| {
            g(t * theta.tan())
        })?;
        return Ok(integral * T::lit(2.0) / T::PI());
    }
    let (mean, sd) = time_process
        .gaussian_law(t, T::zero())
        .expect("density-bearing diffusions are Gaussian");
    // u = r^2 smooths the u^{-1/2} behavior of transition densities near u = 0.
    let reach = (mean.abs() + quad.window() * sd).sqrt();
    let r_breaks: Vec<T> = u_breaks.iter().map(|&u| u.abs().sqrt()).collect();
    quad.try_integrate_split(T::zero(), reach, &r_breaks, |r| {
        let u = r * r;
        let even = time_process.transition_density(t, T::zero(), u)?
            + time_process.transition_density(t, T::zero(), -u)?;
        Ok(even * g(u)? * T::lit(2.0) * r)
    })
}

/// `P^u f(x) = E f(X^x_u)` from the closed-form density of `position`.
pub fn position_expectation<T: Real>(
    position: &ProcessSpec<T>,
    f: &TestFunction<T>,
    u: T,
    x: T,
    quad: &QuadratureRule<T>,
) -> Result<T> {
    if u == T::zero() {
        return Ok(f.eval(x));
    }
    position.transition_density(u, x, x)?;
    if let ProcessSpec::CauchyProcess = position {
        let half_pi = T::FRAC_PI_2();
        return quad.try_integrate(-half_pi, half_pi, |theta| Ok(f.eval(x + u * theta.tan()) / T::PI()));
    }
    let (mean, sd) = position
        .gaussian_law(u, x)
        .expect("density-bearing diffusions are Gaussian");
    if let Some(form) = f.gaussian_form() {
        return Ok(form.gaussian_expectation(mean, sd));
    }
    let w = quad.window();
    quad.try_integrate(-w, w, |z| {
        let phi = (-(z * z) * T::lit(0.5)).exp() / T::TAU().sqrt();
        Ok(phi * f.eval(mean + sd * z))
    })
}

/// Deterministic value of `v(t, x) = E f(X^x(|Y_t|))` by nested quadrature.
pub fn fk_oracle<T: Real>(
    position: &ProcessSpec<T>,
    time_process: &ProcessSpec<T>,
    f: &TestFunction<T>,
    t: T,
    x: T,
    quad: &QuadratureRule<T>,
) -> Result<T> {
    position.transition_density(T::one(), x, x)?;
    subordinate(time_process, t, quad, &[], |u| position_expectation(position, f, u, x, quad))
}

/// The initial-datum term `(2 pi t)^{-1/2} Lf(x)` of the iterated Brownian
/// heat equation, where `lap_f` evaluates `Lf`.
pub fn boundary_term_ibm<T, L>(lap_f: L, t: T, x: T) -> Result<T>
where
    T: Real,
    L: Fn(T) -> T,
{
    positive_time(t)?;
    Ok(lap_f(x) / (T::TAU() * t).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil<T> {
    pub h_t: T,
    pub h_x: T,
}

impl<T: Real> Default for Stencil<T> {
    fn default() -> Self {
        Self {
            h_t: T::lit(1e-3),
            h_x: T::lit(0.02),
        }
    }
}

/// Terms of `dv/dt - f''/(2 sqrt(2 pi t)) - (1/8) d^4v/dx^4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeResidual<T> {
    pub residual: T,
    pub time_derivative: T,
    pub boundary_term: T,
    pub fourth_order_term: T,
}

impl<T: Real> PdeResidual<T> {
    pub fn largest_term(&self) -> T {
        self.time_derivative
            .abs()
            .max(self.boundary_term.abs())
            .max(self.fourth_order_term.abs())
    }
}

/// Residual of the fourth-order equation satisfied by iterated Brownian
/// motion, with `v` from [`fk_oracle`] and derivatives by central finite
/// differences (3-point in `t`, 5-point for the fourth derivative in `x`).
pub fn ibm_pde_residual<T, S>(
    f: &TestFunction<T>,
    f_second: S,
    t: T,
    x: T,
    stencil: Stencil<T>,
    quad: &QuadratureRule<T>,
) -> Result<PdeResidual<T>>
where
    T: Real,
    S: Fn(T) -> T,
{
    let Stencil { h_t, h_x } = stencil;
    if !(h_t > T::zero() && h_x > T::zero()) {
        return Err(Error::invalid("stencil", "steps must be positive"));
    }
    if !(t > h_t) {
        return Err(Error::invalid("t", "must exceed the time step h_t"));
    }
    let bm = ProcessSpec::standard_brownian();
    let v = |tt: T, xx: T| fk_oracle(&bm, &bm, f, tt, xx, quad);
    let two = T::lit(2.0);
    let time_derivative = (v(t + h_t, x)? - v(t - h_t, x)?) / (two * h_t);
    let fourth = (v(t, x - two * h_x)? - T::lit(4.0) * v(t, x - h_x)? + T::lit(6.0) * v(t, x)?
        - T::lit(4.0) * v(t, x + h_x)?
        + v(t, x + two * h_x)?)
        / h_x.powi(4);
    let boundary_term = boundary_term_ibm(|z| f_second(z) * T::lit(0.5), t, x)?;
    let fourth_order_term = fourth / T::lit(8.0);
    Ok(PdeResidual {
        residual: time_derivative - boundary_term - fourth_order_term,
        time_derivative,
        boundary_term,
        fourth_order_term,
    })
}

/// Monte Carlo estimate of `E[w f~(X^{(x,0)}(Y_t))]` for the two-sided
/// process, `w` the killing weight.
#[allow(clippy::too_many_arguments)]
pub fn two_sided_fk_estimate<T, P, M, F>(
    xplus: &P,
    xminus: &M,
    f_tilde: F,
    time_process: &Dynamics<T>,
    t: T,
    x: T,
    cfg: &McConfig,
    killing: &Killing<T>,
) -> Result<MonteCarloEstimate<T>>
where
    T: Real,
    P: ToCoefficients<T> + ?Sized,
    M: ToCoefficients<T> + ?Sized,
    F: Fn(T, T) -> T + Sync + Send,
{
    positive_time(t)?;
    cfg.validate()?;
    let plus = xplus.to_coefficients()?;
    let minus = xminus.to_coefficients()?;
    mc::run(cfg.n_paths, cfg.master_seed, |k| {
        let mut clock = RngStream::derive(cfg.master_seed, k);
        let mut motion = clock.sibling(POSITION_LANE);
        let s = time_process.sample(t, T::zero(), cfg.n_steps, &mut clock)?;
        if !s.is_finite() {
            return Ok(T::nan());
        }
        let draw = two_sided_sample(&plus, &minus, x, T::zero(), s, cfg.n_steps, &mut motion, killing)?;
        Ok(draw.weight * f_tilde(draw.point.0, draw.point.1))
    })
}

/// Two-sided estimate with a Cauchy clock of scale `t / sqrt(g(x) m(x))`
/// (the beam equation with flexural rigidity `g` and mass density `m`).
#[allow(clippy::too_many_arguments)]
pub fn beam_estimate<T, P, M, F>(
    gm_product: T,
    f_tilde: F,
    xplus: &P,
    xminus: &M,
    t: T,
    x: T,
    cfg: &McConfig,
) -> Result<MonteCarloEstimate<T>>
where
    T: Real,
    P: ToCoefficients<T> + ?Sized,
    M: ToCoefficients<T> + ?Sized,
    F: Fn(T, T) -> T + Sync + Send,
{
    positive_time(t)?;
    if !(gm_product > T::zero()) || !gm_product.is_finite() {
        return Err(Error::invalid("gm_product", "g(x) m(x) must be positive"));
    }
    let clock = Dynamics::Spec(ProcessSpec::CauchyProcess);
    two_sided_fk_estimate(
        xplus,
        xminus,
        f_tilde,
        &clock,
        t / gm_product.sqrt(),
        x,
        cfg,
        &Killing::none(),
    )
}

/// Nodes and weights of `int_0^1 h(rho) Beta(alpha, beta)(d rho)`, with the
/// endpoint singularities of the density removed by substitution.
pub fn beta_rule<T: Real>(alpha: T, beta: T, quad: &QuadratureRule<T>) -> Result<Vec<(T, T)>> {
    for (name, v) in [("alpha", alpha), ("beta", beta)] {
        if !(v > T::zero()) || !v.is_finite() {
            return Err(Error::OutOfRange {
                what: name,
                value: v.as_f64(),
                lower: 0.0,
                upper: f64::INFINITY,
            });
        }
    }
    let norm = ln_beta(alpha, beta).exp();
    let half = T::lit(0.5);
    let one = T::one();
    let mut rule = Vec::with_capacity(2 * quad.node_count());
    // [0, 1/2]: rho = w^{1/alpha} absorbs rho^{alpha - 1} when alpha < 1.
    if alpha < one {
        for (w, wt) in quad.mapped(T::zero(), half.powf(alpha)) {
            let rho = w.powf(one / alpha);
            rule.push((rho, wt * (one - rho).powf(beta - one) / (alpha * norm)));
        }
    } else {
        for (rho, wt) in quad.mapped(T::zero(), half) {
            rule.push((rho, wt * rho.powf(alpha - one) * (one - rho).powf(beta - one) / norm));
        }
    }
    // [1/2, 1]: 1 - rho = w^{1/beta}.
    if beta < one {
        for (w, wt) in quad.mapped(T::zero(), half.powf(beta)) {
            let rho = one - w.powf(one / beta);
            rule.push((rho, wt * rho.powf(alpha - one) / (beta * norm)));
        }
    } else {
        for (rho, wt) in quad.mapped(half, one) {
            rule.push((rho, wt * rho.powf(alpha - one) * (one - rho).powf(beta - one) / norm));
        }
    }
    Ok(rule)
}

/// The Beta-kernel average `int_0^1 f(x rho) rho^{a-1} (1-rho)^{b-1} d rho / B(a, b)`.
pub fn intertwine_apply<T, F>(f: F, alpha: T, beta: T, x: T, quad: &QuadratureRule<T>) -> Result<T>
where
    T: Real,
    F: Fn(T) -> T,
{
    Ok(beta_rule(alpha, beta, quad)?
        .into_iter()
        .map(|(rho, w)| w * f(x * rho))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntertwineRow<T> {
    pub x: T,
    /// `E g(U^x(|W_t|))` with `g` the kernel average of `f`.
    pub h_mc: MonteCarloEstimate<T>,
    /// Kernel average of `x -> E f(X^x(|W_t|))` over Monte Carlo node values.
    pub lambda_v: T,
    pub lambda_v_stderr: T,
}

impl<T: Real> IntertwineRow<T> {
    pub fn combined_stderr(&self) -> T {
        (self.h_mc.stderr * self.h_mc.stderr + self.lambda_v_stderr * self.lambda_v_stderr).sqrt()
    }

    pub fn discrepancy(&self) -> T {
        (self.h_mc.mean - self.lambda_v).abs()
    }
}

/// Checks the transport `h(t, .) = Lambda v(t, .)` between squared Bessel
/// processes of dimensions `2(alpha + beta)` (for `h`) and `2 alpha` (for
/// `v`), both iterated by a Brownian motion.
///
/// `quad` evaluates the kernel inside `g`; `lambda_quad` places the nodes
/// at which `v` is estimated, each with its own seed.
#[allow(clippy::too_many_arguments)]
pub fn intertwine_check<T: Real>(
    f: &TestFunction<T>,
    alpha: T,
    beta: T,
    t: T,
    x_grid: &[T],
    cfg: &McConfig,
    quad: &QuadratureRule<T>,
    lambda_quad: &QuadratureRule<T>,
) -> Result<Vec<IntertwineRow<T>>> {
    positive_time(t)?;
    let inner_rule = beta_rule(alpha, beta, quad)?;
    let outer_rule = beta_rule(alpha, beta, lambda_quad)?;
    let upper: Dynamics<T> = ProcessSpec::squared_bessel(T::lit(2.0) * (alpha + beta))?.into();
    let lower: Dynamics<T> = ProcessSpec::squared_bessel(T::lit(2.0) * alpha)?.into();
    let clock: Dynamics<T> = ProcessSpec::standard_brownian().into();
    let g = |z: T| inner_rule.iter().map(|&(rho, w)| w * f.eval(z * rho)).sum::<T>();

    let mut rows = Vec::with_capacity(x_grid.len());
    for (xi, &x) in x_grid.iter().enumerate() {
        if !(x > T::zero()) {
            return Err(Error::invalid("x_grid", "squared Bessel states must be positive"));
        }
        let h_mc = fk_estimate(&upper, &clock, g, t, x, cfg)?;
        let (mut lambda_v, mut variance) = (T::zero(), T::zero());
        for (node, &(rho, w)) in outer_rule.iter().enumerate() {
            let node_cfg = McConfig {
                master_seed: node_seed(cfg.master_seed, xi, node),
                ..*cfg
            };
            let v = fk_estimate(&lower, &clock, |z| f.eval(z), t, x * rho, &node_cfg)?;
            lambda_v += w * v.mean;
            variance += w * w * v.stderr * v.stderr;
        }
        rows.push(IntertwineRow {
            x,
            h_mc,
            lambda_v,
            lambda_v_stderr: variance.sqrt(),
        });
    }
    Ok(rows)
}

fn node_seed(master_seed: u64, x_index: usize, node: usize) -> u64 {
    use rand::RngCore;
    let index = ((x_index as u64) << 32) | node as u64;
    RngStream::derive_lane(master_seed, index, NODE_SEED_LANE).next_u64()
}

/// `(2 sqrt(pi) t^{3/2})^{-1} int_0^inf xi exp(-xi^2 / 4t) v(xi) d xi`,
/// integrated after `xi = 2 sqrt(t) s`.
pub fn half_derivative_transform<T, V>(v_slice: V, t: T, quad: &QuadratureRule<T>) -> Result<T>
where
    T: Real,
    V: Fn(T) -> T,
{
    positive_time(t)?;
    let root_t = t.sqrt();
    // exp(-s^2) is a Gaussian with standard deviation 1/sqrt(2)
    let reach = quad.window() / T::SQRT_2();
    let integral = quad.try_integrate(T::zero(), reach, |s| {
        Ok(s * (-s * s).exp() * v_slice(T::lit(2.0) * root_t * s))
    })?;
    Ok(T::lit(2.0) / (T::PI().sqrt() * root_t) * integral)
}
