//! Solver for a mixed parabolic-hyperbolic boundary problem on the unit
//! square glued along y = 0 to a characteristic triangle, with a nonlocal
//! integral gluing condition. The problem is reduced to weakly singular
//! Volterra equations on the type line; the crate also measures the
//! operator-theoretic properties of the inverse operator numerically.

pub mod analysis;
pub mod config;
pub mod engine;
pub mod error;
pub mod exec;
pub mod functions;
pub mod geometry;
pub mod greens;
pub mod manufactured;
pub mod quadrature;
pub mod rhs;
pub mod solver;
pub mod verification;

pub use error::{Error, Result};
pub use num_complex;
