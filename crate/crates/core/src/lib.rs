//! Numerical Pesin theory for random dynamical systems on `R^d`.
//!
//! Lyapunov spectra and splittings, the Lyapunov metric and Pesin-set
//! certificates, local stable manifolds by graph transform and shooting,
//! and the holonomy (Poincare map) of the stable foliation with two
//! independent Jacobian estimators.

pub mod error;
pub mod holonomy;
pub mod linalg;
pub mod manifold;
pub mod metric;
pub mod oseledets;
pub mod quadrature;
pub mod rds;
pub mod scenarios;

pub use error::{Error, Result};
