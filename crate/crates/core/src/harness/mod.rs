//! Experiment configuration, execution, sweeps, reports and the validation
//! suite.

mod config;
mod report;
mod run;
mod suite;

pub use config::{Budget, ExperimentConfig, Operation, Output, Points};
pub use report::{write_atomic, Payload, Record, ResolutionRecord, RunReport, Verdict};
pub use run::{run, sweep, sweep_csv, with_axis, IDENTITY_SIGMAS, NOISY_IDENTITY_SIGMAS};
pub use suite::{
    boundary_local_time_moment, box_trace_series, criterion, harmonic_trace, isometry, validate_suite, Level,
    SuiteOptions, AIRY_GROUND_STATE, CRITERIA,
};
