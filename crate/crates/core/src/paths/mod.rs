//! Domains, transition kernels, bridge sampling and local times.

mod bridge;
mod domain;
mod kernel;
mod local_time;

pub use bridge::{dirichlet_survival, sample_bridge, sample_free_path, BridgePath};
pub use domain::{Boundary, DomainSpec, Side};
pub use kernel::{image_terms, transition_kernel, transition_kernel_with, Truncation};
pub(crate) use local_time::local_time_for_weights;
pub use local_time::{
    boundary_local_time, default_bin_width, default_steps, effective_bin_width, local_time, local_time_with,
    BoundaryRule, LocalTimeProfile, LocalTimeSpec,
};
