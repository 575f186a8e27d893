//! Numerical toolkit for the local pressure expansion of the incompressible
//! Navier–Stokes equations: Calderón–Zygmund kernels, composed Riesz
//! transforms, near/far pressure decompositions, the Oseen semigroup and
//! Duhamel integral, mollified approximations, a small-data Picard solver,
//! and the residual checks that tie them together.

pub mod analytic;
pub mod config;
pub mod error;
pub mod exec;
pub mod field;
pub mod harness;
pub mod kernel;
pub mod mollify;
pub mod picard;
pub mod pressure;
pub mod report;
pub mod riesz;
pub mod semigroup;
pub mod spectral;
pub mod suites;

pub use error::{Error, Result};
