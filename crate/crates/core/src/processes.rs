//! Named processes: coefficient fields, exact terminal samplers and the
//! closed-form transition densities used by the quadrature oracles.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::scalar::{normal_cdf, Real};
use crate::sde::{euler_terminal, CoefficientField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProcessSpec<T> {
    BrownianMotion { sigma: T },
    BrownianWithDrift { mu: T, sigma: T },
    /// `dY = -Y/2 dt + dW`.
    OrnsteinUhlenbeck,
    /// Generator `2x d^2/dx^2 + delta d/dx` (dimension `delta`).
    SquaredBessel { delta: T },
    /// Velocity `+-v`, flipping at the jumps of a Poisson(`lambda`) clock.
    Telegraph { lambda: T, v: T },
    CauchyProcess,
}

fn positive<T: Real>(name: &'static str, value: T) -> Result<T> {
    if value > T::zero() && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::invalid(name, format!("must be positive and finite, got {value}")))
    }
}

impl<T: Real> ProcessSpec<T> {
    pub fn brownian(sigma: T) -> Result<Self> {
        Ok(Self::BrownianMotion {
            sigma: positive("sigma", sigma)?,
        })
    }

    pub fn standard_brownian() -> Self {
        Self::BrownianMotion { sigma: T::one() }
    }

    pub fn brownian_with_drift(mu: T, sigma: T) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::invalid("mu", "must be finite"));
        }
        Ok(Self::BrownianWithDrift {
            mu,
            sigma: positive("sigma", sigma)?,
        })
    }

    pub fn squared_bessel(delta: T) -> Result<Self> {
        Ok(Self::SquaredBessel {
            delta: positive("delta", delta)?,
        })
    }

    pub fn telegraph(lambda: T, v: T) -> Result<Self> {
        Ok(Self::Telegraph {
            lambda: positive("lambda", lambda)?,
            v: positive("v", v)?,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::BrownianMotion { .. } => "bm",
            Self::BrownianWithDrift { .. } => "bmdrift",
            Self::OrnsteinUhlenbeck => "ou",
            Self::SquaredBessel { .. } => "sqbessel",
            Self::Telegraph { .. } => "telegraph",
            Self::CauchyProcess => "cauchy",
        }
    }

    pub fn is_diffusion(&self) -> bool {
        !matches!(self, Self::Telegraph { .. } | Self::CauchyProcess)
    }

    /// Drift and diffusion of the SDE; the squared Bessel diffusion uses
    /// full truncation `2 sqrt(max(x, 0))`.
    pub fn coefficients(&self) -> Result<CoefficientField<T>> {
        Ok(match *self {
            Self::BrownianMotion { sigma } => CoefficientField::constant(T::zero(), sigma),
            Self::BrownianWithDrift { mu, sigma } => CoefficientField::constant(mu, sigma),
            Self::OrnsteinUhlenbeck => {
                let half = T::lit(0.5);
                CoefficientField::scalar(move |_, x| -half * x, |_, _| T::one())
            }
            Self::SquaredBessel { delta } => {
                let two = T::lit(2.0);
                CoefficientField::scalar(move |_, _| delta, move |_, x| two * x.max(T::zero()).sqrt())
            }
            Self::Telegraph { .. } | Self::CauchyProcess => {
                return Err(Error::unsupported("coefficients", self.to_string()))
            }
        })
    }

    /// Mean and standard deviation at time `t` from `x`, for the Gaussian
    /// processes.
    pub fn gaussian_law(&self, t: T, x: T) -> Option<(T, T)> {
        match *self {
            Self::BrownianMotion { sigma } => Some((x, sigma * t.sqrt())),
            Self::BrownianWithDrift { mu, sigma } => Some((x + mu * t, sigma * t.sqrt())),
            Self::OrnsteinUhlenbeck => {
                let decay = (-t * T::lit(0.5)).exp();
                Some((x * decay, (-(-t).exp_m1()).sqrt()))
            }
            _ => None,
        }
    }

    fn density_law(&self, t: T, x: T) -> Result<DensityLaw<T>> {
        if !(t > T::zero()) {
            return Err(Error::OutOfRange {
                what: "t",
                value: t.as_f64(),
                lower: 0.0,
                upper: f64::INFINITY,
            });
        }
        match self {
            Self::OrnsteinUhlenbeck if x != T::zero() => Err(Error::unsupported(
                "transition_density",
                "ou started away from 0 (only the law from 0 is tabulated)",
            )),
            Self::CauchyProcess => Ok(DensityLaw::Cauchy { center: x, scale: t }),
            _ => match self.gaussian_law(t, x) {
                Some((mean, sd)) => Ok(DensityLaw::Gaussian { mean, sd }),
                None => Err(Error::unsupported("transition_density", self.to_string())),
            },
        }
    }

    /// Closed-form `p(t, x, y)`.
    pub fn transition_density(&self, t: T, x: T, y: T) -> Result<T> {
        Ok(self.density_law(t, x)?.pdf(y))
    }

    /// `P(X_t <= y | X_0 = x)` for the processes with a closed-form density.
    pub fn transition_cdf(&self, t: T, x: T, y: T) -> Result<T> {
        Ok(self.density_law(t, x)?.cdf(y))
    }

    pub fn has_exact_sampler(&self) -> bool {
        !matches!(self, Self::SquaredBessel { .. })
    }

    /// Exact draw of the process at time `t` started from `x`.
    pub fn sample_terminal(&self, t: T, x: T, stream: &mut RngStream) -> Result<T> {
        if !(t >= T::zero()) || !t.is_finite() {
            return Err(Error::OutOfRange {
                what: "t",
                value: t.as_f64(),
                lower: 0.0,
                upper: f64::INFINITY,
            });
        }
        if t == T::zero() {
            return Ok(x);
        }
        match *self {
            Self::SquaredBessel { .. } => Err(Error::unsupported(
                "sample_terminal",
                "sqbessel has no exact sampler (use the Euler scheme)",
            )),
            Self::CauchyProcess => Ok(x + t * stream.standard_cauchy::<T>()),
            Self::Telegraph { lambda, v } => Ok(sample_telegraph(lambda, v, t, x, stream)),
            _ => {
                let (mean, sd) = self.gaussian_law(t, x).expect("gaussian process");
                Ok(mean + sd * stream.standard_gaussian::<T>())
            }
        }
    }
}

fn sample_telegraph<T: Real>(lambda: T, v: T, t: T, x: T, stream: &mut RngStream) -> T {
    let mut velocity = if stream.coin() { v } else { -v };
    let mut position = x;
    let mut remaining = t;
    loop {
        let hold = stream.exponential(lambda);
        if hold >= remaining {
            position += velocity * remaining;
            break;
        }
        position += velocity * hold;
        remaining -= hold;
        velocity = -velocity;
    }
    let reach = v * t;
    position.max(x - reach).min(x + reach)
}

#[derive(Debug, Clone, Copy)]
enum DensityLaw<T> {
    Gaussian { mean: T, sd: T },
    Cauchy { center: T, scale: T },
}

impl<T: Real> DensityLaw<T> {
    fn pdf(&self, y: T) -> T {
        match *self {
            Self::Gaussian { mean, sd } => {
                let z = (y - mean) / sd;
                (-(z * z) * T::lit(0.5)).exp() / (sd * T::TAU().sqrt())
            }
            Self::Cauchy { center, scale } => {
                let d = y - center;
                scale / (T::PI() * (scale * scale + d * d))
            }
        }
    }

    fn cdf(&self, y: T) -> T {
        match *self {
            Self::Gaussian { mean, sd } => normal_cdf((y - mean) / sd),
            Self::Cauchy { center, scale } => T::lit(0.5) + ((y - center) / scale).atan() / T::PI(),
        }
    }
}

impl<T: Real> fmt::Display for ProcessSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BrownianMotion { sigma } => write!(f, "bm(sigma={sigma})"),
            Self::BrownianWithDrift { mu, sigma } => write!(f, "bmdrift(mu={mu},sigma={sigma})"),
            Self::OrnsteinUhlenbeck => f.write_str("ou"),
            Self::SquaredBessel { delta } => write!(f, "sqbessel(delta={delta})"),
            Self::Telegraph { lambda, v } => write!(f, "telegraph(lambda={lambda},v={v})"),
            Self::CauchyProcess => f.write_str("cauchy"),
        }
    }
}

impl<T: Real> FromStr for ProcessSpec<T> {
    type Err = Error;

    fn from_str(input: &str) -> Result<Self> {
        let parse_err = |reason: String| Error::Parse {
            input: input.to_string(),
            reason,
        };
        let text: String = input.chars().filter(|c| !c.is_whitespace()).collect();
        let (name, args) = match text.find('(') {
            Some(open) => {
                let body = text[open + 1..]
                    .strip_suffix(')')
                    .ok_or_else(|| parse_err("missing closing parenthesis".into()))?;
                (&text[..open], body)
            }
            None => (text.as_str(), ""),
        };
        let mut params: Vec<(&str, T)> = Vec::new();
        for item in args.split(',').filter(|s| !s.is_empty()) {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| parse_err(format!("expected key=value, got `{item}`")))?;
            let value: f64 = value
                .parse()
                .map_err(|_| parse_err(format!("`{value}` is not a number")))?;
            if params.iter().any(|(k, _)| *k == key) {
                return Err(parse_err(format!("duplicate parameter `{key}`")));
            }
            params.push((key, T::lit(value)));
        }
        let mut take = |key: &str, default: Option<T>| -> Result<T> {
            match params.iter().position(|(k, _)| *k == key) {
                Some(i) => Ok(params.remove(i).1),
                None => default.ok_or_else(|| parse_err(format!("missing parameter `{key}`"))),
            }
        };
        let spec = match name.to_ascii_lowercase().as_str() {
            "bm" => Self::brownian(take("sigma", Some(T::one()))?)?,
            "bmdrift" => {
                let mu = take("mu", None)?;
                Self::brownian_with_drift(mu, take("sigma", Some(T::one()))?)?
            }
            "ou" => Self::OrnsteinUhlenbeck,
            "sqbessel" => Self::squared_bessel(take("delta", None)?)?,
            "telegraph" => {
                let lambda = take("lambda", None)?;
                Self::telegraph(lambda, take("v", None)?)?
            }
            "cauchy" => Self::CauchyProcess,
            other => return Err(parse_err(format!("unknown process `{other}`"))),
        };
        if let Some((key, _)) = params.first() {
            return Err(parse_err(format!("unknown parameter `{key}` for {name}")));
        }
        Ok(spec)
    }
}

/// A process given either by name or by raw coefficients.
#[derive(Debug, Clone)]
pub enum Dynamics<T> {
    Spec(ProcessSpec<T>),
    Field(CoefficientField<T>),
}

impl<T: Real> Dynamics<T> {
    pub fn spec(&self) -> Option<&ProcessSpec<T>> {
        match self {
            Self::Spec(s) => Some(s),
            Self::Field(_) => None,
        }
    }

    pub fn has_exact_sampler(&self) -> bool {
        self.spec().is_some_and(ProcessSpec::has_exact_sampler)
    }

    /// Value at time `t` from `x`: exact when a sampler exists, otherwise
    /// the Euler scheme with `steps` steps.
    pub fn sample(&self, t: T, x: T, steps: usize, stream: &mut RngStream) -> Result<T> {
        match self {
            Self::Spec(s) if s.has_exact_sampler() => s.sample_terminal(t, x, stream),
            _ => {
                let field = self.to_coefficients()?;
                field.require_scalar("sample")?;
                euler_terminal(&field, x, t, steps, stream)
            }
        }
    }
}

impl<T> From<ProcessSpec<T>> for Dynamics<T> {
    fn from(spec: ProcessSpec<T>) -> Self {
        Self::Spec(spec)
    }
}

impl<T> From<CoefficientField<T>> for Dynamics<T> {
    fn from(field: CoefficientField<T>) -> Self {
        Self::Field(field)
    }
}

/// Anything that reduces to a coefficient field.
pub trait ToCoefficients<T> {
    fn to_coefficients(&self) -> Result<CoefficientField<T>>;
}

impl<T: Real> ToCoefficients<T> for CoefficientField<T> {
    fn to_coefficients(&self) -> Result<CoefficientField<T>> {
        Ok(self.clone())
    }
}

impl<T: Real> ToCoefficients<T> for ProcessSpec<T> {
    fn to_coefficients(&self) -> Result<CoefficientField<T>> {
        self.coefficients()
    }
}

impl<T: Real> ToCoefficients<T> for Dynamics<T> {
    fn to_coefficients(&self) -> Result<CoefficientField<T>> {
        match self {
            Self::Spec(s) => s.coefficients(),
            Self::Field(f) => Ok(f.clone()),
        }
    }
}
