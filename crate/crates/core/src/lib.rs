//! Weakly over-penalised Nitsche schemes for the Poisson and Stokes problems
//! on anisotropic triangulations of the unit square.
//!
//! The discretisation uses Crouzeix–Raviart velocities/potentials with
//! boundary data imposed only through penalised edge means, elementwise
//! constant pressures, and a lowest-order Raviart–Thomas reconstruction of the
//! test functions in the Stokes load term for pressure robustness.

pub mod analysis;
pub mod error;
pub mod experiment;
pub mod fespace;
pub mod field;
pub mod linalg;
pub mod mesh;
pub mod poisson;
pub mod quadrature;
pub mod stokes;
pub mod verify;

pub use error::{FemError, Result};
