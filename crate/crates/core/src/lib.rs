//! Simulation and Feynman-Kac estimation for iterated processes
//! `Z_t = X(|Y_t|)`.
//!
//! The numerical core is generic over the scalar type (`f32` or `f64`, see
//! [`Real`]); the `*64` aliases below fix it to `f64`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod feynman_kac;
pub mod iterated;
pub mod mc;
pub mod processes;
pub mod quadrature;
pub mod rng;
pub mod scalar;
pub mod sde;
pub mod stats;

pub use error::{Error, Result};
pub use feynman_kac::{
    beam_estimate, boundary_term_ibm, fk_estimate, fk_oracle, half_derivative_transform, ibm_pde_residual,
    intertwine_apply, intertwine_check, two_sided_fk_estimate, IntertwineRow, PdeResidual, Stencil, TestFunction,
};
pub use iterated::{simulate_iterated, two_sided_sample, IteratedPath, Killing, TwoSidedSample};
pub use mc::{McConfig, MonteCarloEstimate, Stability};
pub use processes::{Dynamics, ProcessSpec, ToCoefficients};
pub use quadrature::QuadratureRule;
pub use rng::{derive_stream, RngStream, StreamId};
pub use scalar::Real;
pub use sde::{euler_path, euler_path_with_increments, CoefficientField, EulerPath};
pub use stats::{
    density_compare, fit_order, strong_error, variation_estimate, DensityComparison, ErrorCurve, Histogram,
    StrongErrorConfig,
};

pub type CoefficientField64 = CoefficientField<f64>;
pub type EulerPath64 = EulerPath<f64>;
pub type IteratedPath64 = IteratedPath<f64>;
pub type MonteCarloEstimate64 = MonteCarloEstimate<f64>;
pub type ProcessSpec64 = ProcessSpec<f64>;
pub type Dynamics64 = Dynamics<f64>;
pub type QuadratureRule64 = QuadratureRule<f64>;
pub type ErrorCurve64 = ErrorCurve<f64>;
pub type Histogram64 = Histogram<f64>;
pub type TestFunction64 = TestFunction<f64>;

pub type EulerPath32 = EulerPath<f32>;
pub type IteratedPath32 = IteratedPath<f32>;
pub type ProcessSpec32 = ProcessSpec<f32>;
