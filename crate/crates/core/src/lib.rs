//! Reliability and sensitivity analysis of variable-stiffness composite
//! laminate (VSCL) plates with cutouts.
//!
//! The crate is organised bottom-up:
//!
//! - [`fem`]: XFEM / first-order shear deformation free-vibration solver.
//! - [`stochastic`]: random-variable catalog, transforms, Latin hypercube
//!   sampling and the frequency limit state.
//! - [`surrogate`]: one-hidden-layer tanh network with analytic input
//!   gradient and Hessian.
//! - [`reliability`]: MPP search, FORM/SORM, Monte Carlo, importance
//!   sampling and the adaptive surrogate + importance sampling loop.
//! - [`sensitivity`]: Garson weight partitioning and total-effect indices
//!   of the failure indicator.

pub mod error;
pub mod fem;
pub mod reliability;
pub mod sensitivity;
pub mod stochastic;
pub mod surrogate;

pub use error::{Error, Result};
