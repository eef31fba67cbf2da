//! Finite-difference spectral oracle: a lumped discretization of the
//! quadratic form of `H`, its lowest eigenpairs, and spectral traces to
//! compare with the Feynman-Kac estimates.

mod eigen;
mod form;
mod oracle;

pub use eigen::{eigen_solve, tridiagonal_eigen, SpectralResult, RESIDUAL_TOL};
pub use form::{discretize_form, form_grid, DiscreteForm, FormNoise, MIN_INTERVALS};
pub use oracle::{
    epsilon_convergence, oracle_equivalence, spectral_trace, ConvergenceReport, ConvergenceRow, EquivalenceReport,
    OracleBudget, SeedComparison, TraceValue, CONVERGENCE_FRACTION, EQUIVALENCE_FRACTION, EQUIVALENCE_SIGMAS,
    TAIL_FLAG,
};
