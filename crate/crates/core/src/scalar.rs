//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
///
/// Special functions (`erf`, `lgamma`) and random variates are evaluated in
/// double precision and rounded into `Self`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts a double precision literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("every f64 is representable after rounding")
    }

    /// Converts a count.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count is representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Error function, computed in double precision.
pub fn erf<T: Real>(x: T) -> T {
    T::lit(libm::erf(x.as_f64()))
}

/// Standard normal cumulative distribution function.
pub fn normal_cdf<T: Real>(x: T) -> T {
    T::lit(0.5 * libm::erfc(-x.as_f64() / std::f64::consts::SQRT_2))
}

/// Logarithm of the Beta function.
pub fn ln_beta<T: Real>(a: T, b: T) -> T {
    let (a, b) = (a.as_f64(), b.as_f64());
    T::lit(libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(a + b))
}

/// Formats a value with 17 significant digits.
pub fn format_real<T: Real>(x: T) -> String {
    format!("{:.16e}", x.as_f64())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_cdf_reference_points() {
        assert_eq!(normal_cdf(0.0_f64), 0.5);
        assert!((normal_cdf(1.959963984540054_f64) - 0.975).abs() < 1e-12);
        assert!((normal_cdf(-1.0_f32) - 0.158_655_25).abs() < 1e-6);
    }

    #[test]
    fn beta_function_small_arguments() {
        // B(1,1) = 1, B(2,3) = 1/12
        assert!(ln_beta(1.0_f64, 1.0).abs() < 1e-15);
        assert!((ln_beta(2.0_f64, 3.0).exp() - 1.0 / 12.0).abs() < 1e-14);
    }

    #[test]
    fn seventeen_significant_digits_round_trip() {
        let x = 0.1_f64 + 0.2;
        let s = format_real(x);
        assert_eq!(s.parse::<f64>().unwrap(), x);
    }
}
