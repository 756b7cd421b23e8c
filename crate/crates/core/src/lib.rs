//! Phonon-limited orbital relaxation of SiV⁻ centers in nanodiamonds.
//!
//! The pipeline: build a voxel scene ([`mesh`]), solve the elastic eigenproblem
//! ([`fem`]), project mode strain onto the defect ([`hamiltonian`]), sum
//! golden-rule rates ([`rates`]), look at the density of states ([`spectrum`]) and compare with measurements ([`experiment`]).

// Validation is written as `!(x > 0.0)` so NaN fails it too, and the
// numeric kernels index several arrays in lockstep.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod digest;
pub mod error;
pub mod experiment;
pub mod fem;
pub mod hamiltonian;
pub mod mesh;
pub mod rates;
pub mod spectrum;
pub mod units;

pub use error::{Error, Result};

/// Version string embedded in every output file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
