//! Noise laws, the gamma-seminorm, exact sampling of the antiderivative
//! process `Xi` on grids, and mollified derivatives `Xi'_eps`.

mod covariance;
mod mollifier;
mod path;
mod profile;
mod sample;

pub use covariance::{gamma_seminorm_sq, xi_covariance, CovarianceModel, SeminormBound, SingularComponent};
pub use mollifier::{mollified_covariance, MollifierSpec};
pub use path::{mollified_derivative, mollified_value, uniform_grid, GridNoisePath};
pub use profile::Profile;
pub use sample::{sample_noise_path, NoiseSampler, CIRCULANT_THRESHOLD, PSD_JITTER};
