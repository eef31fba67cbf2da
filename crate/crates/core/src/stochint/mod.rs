//! Pathwise integration of compactly supported functions against `Xi`:
//! step-function sums, the adaptive Karandikar scheme, and the
//! Riemann-Stieltjes cross-check `-<f', Xi>`.

mod integral;
mod step;

pub(crate) use integral::integrate_uniform_bins;
pub use integral::{
    integrate_step, karandikar_integrate, karandikar_stops, riemann_stieltjes, KarandikarLevel, KarandikarTrace,
    DEFAULT_CONVERGENCE_TOL, DEFAULT_MAX_LEVEL,
};
pub use step::{Differentiable, FnIntegrand, Hat, Integrand, StepFunction};
