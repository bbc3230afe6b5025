//! Sparse Drude-Lorentz bath spectral densities from short energy-gap time
//! series, and second-order time-convolutionless (TCL-2) exciton dynamics
//! driven by them.
//!
//! The pipeline runs gaps → [`timeseries::autocorrelation`] →
//! [`solver::solve`] (or the [`baseline`] cosine transform) →
//! [`bathmodel::DrudeLorentzModel`] → [`bathmodel::BathKernel`] →
//! [`dynamics::propagate`].

pub mod atom;
pub mod baseline;
pub mod bathmodel;
pub mod dictionary;
pub mod dynamics;
pub mod error;
mod quadrature;
pub mod solver;
pub mod synth;
pub mod timeseries;
pub mod units;

pub use atom::Atom;
pub use error::{Error, Result};
