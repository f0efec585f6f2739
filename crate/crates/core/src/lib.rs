//! Second-order analysis of the stochastic heat equation driven by noise
//! that is fractional Brownian in time (Hurst index `H > 1/2`) and
//! spatially correlated through a covariance kernel `f`.
//!
//! The crate evaluates the fBm time constants and kernels, the heat-kernel
//! pair integrals, the norms `‖g_{tx}‖²` whose finiteness decides existence
//! of the mild solution, second moments of the solution, and exact
//! Gaussian sampling of the solution on small grids.

pub mod error;
pub mod field_sim;
pub mod fractional_time;
pub mod gaussian_oracles;
pub mod heat_green;
pub mod norms_existence;
pub mod quadrature;
pub mod spatial_kernels;
pub mod verify;

pub use error::{Error, Result};
pub use fractional_time::{derive_hurst_params, HurstParams};
pub use heat_green::SpaceTimePoint;
pub use norms_existence::{BaseRule, NormResult, QuadratureSpec};
pub use spatial_kernels::{KernelFamily, KernelSpec};
