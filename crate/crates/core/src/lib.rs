//! Numerical verification of curvature formulas for Riemannian submersions with
//! `S^3` structure group: Cheeger deformations, O'Neill tensors, holonomy fields,
//! checked against a finite-difference curvature oracle.

pub mod bundle;
pub mod cheeger;
pub mod error;
pub mod lie;
pub mod manifold;
pub mod metric;
pub mod ode;
pub mod riemann;
pub mod submersion;
pub mod verify;

pub use error::{Error, Result};
