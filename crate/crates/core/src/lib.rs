//! Two-phase (water/oil) flow in a thin cylinder in fractional-flow form.
//!
//! The crate provides the phase closures, the problem definition and regime
//! classifier, the cross-section cell solver, the one-dimensional limit and
//! corrector solvers, an axisymmetric reference solver for the full
//! problem, reconstruction of the asymptotic approximations, and the
//! verification harness that measures convergence rates in the thickness
//! parameter ε.

pub mod cell;
pub mod constitutive;
pub mod error;
pub mod linalg;
pub mod problem;
pub mod quadrature;
pub mod reconstruct;
pub mod reduced1d;
pub mod reference;
pub mod scheme;
pub mod verify;

pub use error::{Error, Result};
