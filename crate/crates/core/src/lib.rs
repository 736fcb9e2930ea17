//! Regularized nonlinear inversion of frequency-domain electromagnetic
//! soundings taken with a two-coil ground conductivity meter.
//!
//! Apparent-conductivity readings at several heights, in vertical and/or
//! horizontal dipole orientation, are inverted for a layered conductivity
//! profile with a damped Gauss-Newton method whose steps are regularized by
//! truncated (generalized) singular value decompositions.

pub mod error;
pub mod forward;
pub mod harness;
pub mod hankel;
pub mod jacobian;
pub mod regularize;
pub mod solver;

pub use error::{Error, Result};
