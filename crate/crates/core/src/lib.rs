//! Gaussian phase-space Monte Carlo for interacting fermions.
//!
//! Quantum states are sampled as weighted ensembles of Gaussian operator
//! kernels whose covariances follow stochastic equations. The crate
//! contains an imaginary-time sampler for the Hubbard model with branching
//! population control, a real-time sampler for molecular dissociation into
//! bosonic or fermionic atom pairs, and exact reference solutions used to
//! check both.

pub mod branching;
pub mod cli;
pub mod config;
pub mod dissociation;
pub mod error;
pub mod hubbard;
mod linalg;
pub mod model;
pub mod oracle;
pub mod output;
pub mod phase_space;
pub mod sde;
pub mod stats;

pub use error::{Error, Result};
