//! Finite-sample certificates for Gaussian approximations of Bayesian
//! posteriors.
//!
//! The pipeline: describe a model ([`model`]), locate modes and curvature
//! ([`geometry`]), certify the regularity constants and assumptions at the
//! observed sample size ([`certificates`]), evaluate the closed-form error
//! bounds ([`bounds`]), and validate them against exact or quadrature
//! ground truth ([`oracle`]).

pub mod bounds;
pub mod certificates;
pub mod error;
pub mod geometry;
pub mod model;
pub mod oracle;
pub mod quad;

pub use error::{AuditError, Result};
