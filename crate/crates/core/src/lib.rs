//! Simulation and nonparametric estimation for small-noise linear SDEs
//! driven by general centered Gaussian processes.
//!
//! The numerical modules are generic over [`Scalar`] (`f32` or `f64`);
//! the Monte Carlo harness works in `f64`. Concrete aliases for both
//! precisions are exported here.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod gp_cov;
pub mod kernels;
pub mod linalg;
pub mod mc_harness;
pub mod quadrature;
pub mod rng;
pub mod scalar;
pub mod sde_sim;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type CovarianceModel64 = gp_cov::CovarianceModel<f64>;
pub type CovarianceModel32 = gp_cov::CovarianceModel<f32>;
pub type GridSpec64 = gp_cov::GridSpec<f64>;
pub type GridSpec32 = gp_cov::GridSpec<f32>;
pub type GaussianPath64 = gp_cov::GaussianPath<f64>;
pub type GaussianPath32 = gp_cov::GaussianPath<f32>;
pub type Kernel64 = kernels::KernelFunction<f64>;
pub type Kernel32 = kernels::KernelFunction<f32>;
pub type TrendFunction64 = sde_sim::TrendFunction<f64>;
pub type TrendFunction32 = sde_sim::TrendFunction<f32>;
pub type SdeConfig64 = sde_sim::SdeConfig<f64>;
pub type SdeConfig32 = sde_sim::SdeConfig<f32>;
pub type SdePath64 = sde_sim::SdePath<f64>;
pub type SdePath32 = sde_sim::SdePath<f32>;
pub type EstimatorConfig64 = estimators::EstimatorConfig<f64>;
pub type EstimatorConfig32 = estimators::EstimatorConfig<f32>;
pub type EstimateCurve64 = estimators::EstimateCurve<f64>;
pub type EstimateCurve32 = estimators::EstimateCurve<f32>;
