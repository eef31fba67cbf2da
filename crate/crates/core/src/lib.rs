//! Monte Carlo Feynman-Kac kernels for `H = -1/2 d^2/dx^2 + V + xi` on the
//! line, the half line and bounded intervals, where `xi` is a stationary
//! Gaussian noise given through its antiderivative `Xi`.
//!
//! The crate is organised bottom-up:
//!
//! * [`noise`]: covariance models, sampling of `Xi` on grids, mollification.
//! * [`stochint`]: pathwise integrals of step and piecewise-continuous functions against `Xi`.
//! * [`paths`]: domains, transition kernels, bridge sampling, local times.
//! * [`feynman_kac`]: kernel, trace and Hilbert-Schmidt estimators.
//! * [`spectral`]: a finite-difference eigenvalue oracle for the same operators.
//! * [`harness`]: configuration, deterministic execution and reports.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod error;
pub mod exec;
pub mod feynman_kac;
pub mod harness;
pub mod noise;
pub mod paths;
pub mod quad;
pub mod rng;
pub mod special;
pub mod spectral;
pub mod stochint;

pub use error::{Error, FieldError, Result};
