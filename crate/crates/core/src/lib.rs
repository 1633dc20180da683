//! Spectral-Galerkin simulation and steering of a strongly damped semilinear
//! wave equation with delay, memory and impulses on `(0, L)` with Dirichlet
//! boundary conditions.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod control;
pub mod controllability;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod harness;
pub mod nonlinearity;
pub mod quadrature;
pub mod semigroup;
pub mod spectral;
pub mod state;

pub use error::{Error, Result};

#[cfg(test)]
#[path = "../tests/common/expm.rs"]
mod expm_oracle;
