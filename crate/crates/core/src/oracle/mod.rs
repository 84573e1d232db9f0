//! Exact references for the samplers: Fock-space operators, Pfaffians,
//! materialized Gaussian kernels, exact diagonalization of small Hubbard
//! clusters, closed-form single-site thermodynamics and number-state
//! solutions of molecular dissociation.

pub mod analytic;
pub mod dissociation;
pub mod ed;
pub mod fock;
pub mod kernel;
pub mod pfaffian;

pub use analytic::single_site_analytic;
pub use dissociation::{dissociation_oracle, poisson_cutoff, NumberStatePoint};
pub use ed::{ed_hubbard, EdPoint, ED_MAX_DIMENSION};
pub use fock::{annihilators, FockOperator};
pub use kernel::{
    check_identities, check_identities_with_step, materialize_kernel, pfaffian_normalization, random_state,
    trace_normalization, kernel_battery, ExtendedCovariance, IdentityDeviations, KernelCheckRow,
};
pub use pfaffian::pfaffian;
