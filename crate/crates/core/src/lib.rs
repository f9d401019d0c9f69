//! Spectral reference solutions, P1 finite elements and error estimators for
//! the stochastic Schrödinger equation on `(0, 1)` with Dirichlet conditions.

pub mod error;
pub mod fem;
pub mod functional;
pub mod harness;
pub mod law;
pub mod mc;
pub mod noise;
pub mod operator_algebra;
pub mod quad;
pub mod rate;
pub mod selftest;
pub mod spectral;
pub mod sweep;
pub mod timeint;

pub use error::{Error, Result};
