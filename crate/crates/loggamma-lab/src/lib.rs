//! Numerical laboratory for the log-gamma directed polymer.
//!
//! The crate has three layers:
//! * sampling of the polymer partition function (`polymer`) together with the
//!   scaling theory that centers and rescales it (`scaling`, `specfun`);
//! * contour quadrature and kernel evaluation for the Fredholm-determinant
//!   Laplace transform and the limiting Tracy-Widom / BBP distributions
//!   (`contour`, `kernels`, `fredholm`, `airy`);
//! * the experiment harness and CLI that cross-verify the two (`harness`).

pub mod airy;
pub mod contour;
pub mod error;
pub mod fredholm;
pub mod harness;
pub mod kernels;
pub mod polymer;
pub mod scaling;
pub mod specfun;
pub mod stats;

pub use error::{Error, Result};
