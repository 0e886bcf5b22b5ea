//! Off-diagonal Seeley-DeWitt coefficients on a single coordinate chart.
//!
//! The crate evaluates the Hadamard transport recursion along geodesics of a
//! metric of arbitrary nondegenerate signature, with a gauge connection and a
//! potential acting on a trivial complex vector bundle. All derivatives are
//! carried exactly (to truncation order) by [`jets::Jet`] arithmetic.
//!
//! Layers, bottom up: [`jets`] and [`linalg`] provide the arithmetic,
//! [`expr`] and [`geometry`] the metric, [`geodesic`] the flow and boundary
//! value problem, [`synge`] and [`bundle`] the world function, van Vleck
//! determinant and transport, [`hadamard`] the coefficients and identity
//! checks, and [`borel`] the smooth resummation in the expansion parameter.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod borel;
pub mod bundle;
pub mod chart;
pub mod error;
pub mod expr;
pub mod geodesic;
pub mod geometry;
pub mod hadamard;
pub mod jets;
pub mod linalg;
pub mod quadrature;
pub mod scalar;
pub mod synge;

pub use error::{Error, Result};
pub use jets::{Jet, Layout};
pub use num_complex::Complex64;
pub use scalar::{Real, Scalar};

/// Library version embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
