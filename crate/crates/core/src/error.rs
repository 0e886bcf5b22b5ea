//! Crate-wide error type.

use alloc::string::String;

use crate::expr::ParseError;
use crate::jets::JetError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("expression domain error: {0}")]
    Domain(String),
    #[error("metric is singular at {at}")]
    SingularMetric { at: String },
    #[error("matrix is numerically singular ({what})")]
    Singular { what: &'static str },
    #[error("non-finite state during {what}")]
    NonFinite { what: &'static str },
    #[error("conjugate point: shooting Jacobian singular (det = {det:e})")]
    ConjugatePoint { det: f64 },
    #[error("Newton iteration did not converge after {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("signature changes across the chart: {found} vs {expected}")]
    Signature { expected: i32, found: i32 },
    #[error("sign of the van Vleck determinant is {found}, expected {expected}")]
    VanVleckSign { expected: i32, found: i32 },
    #[error("{what} violates hermiticity by {defect:e}")]
    NotHermitian { what: String, defect: f64 },
    #[error("cost guard exceeded: {needed} evaluations requested, limit {limit}")]
    CostGuard { needed: u64, limit: u64 },
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
