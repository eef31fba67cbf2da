//! Monte Carlo estimators of Feynman-Kac kernels, traces and related
//! identities.
//!
//! Every estimator takes a root seed; paths are drawn in blocks of
//! [`BLOCK`] from substreams keyed by the estimate, the quadrature node and
//! the block index, and reduced in index order, so results do not depend on
//! the number of worker threads.

mod estimate;
mod kernel;
mod potential;
mod trace;
mod weight;

pub use estimate::{joint_stderr, KernelEstimate, MultiEstimate, QuadratureSpec, Resolution, TruncationCertificate};
pub use kernel::{deterministic_kernel, kernel_many, mollified_kernel, random_kernel, Stream, BLOCK, DISCARD_WARNING};
pub use potential::{PotentialKind, PotentialSpec};
pub use trace::{
    hs_norm_check, laplace_transform_moment, semigroup_check, trace_estimate, trace_many, HsBudget, IdentityCheck,
    LaplaceEstimate, NoiseSetup, MIN_HS_NODES, TRUNCATION_RATIO,
};
pub use weight::{CenterTable, NoiseTerm, Weighting};
