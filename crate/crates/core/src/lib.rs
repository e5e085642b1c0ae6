//! Stability-preserving H² model reduction.
//!
//! A stable full-order model is brought to `(J - R)` form and reduced
//! models are searched on `Skew(r) × Sym₊(r) × R^{r×m} × R^{p×r}` with a
//! Riemannian trust-region method started from balanced truncation. Every
//! point of that manifold is an asymptotically stable model.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision, clippy::needless_range_loop)]

pub mod balanced;
pub mod error;
pub mod linalg;
pub mod lti;
pub mod manifold;
pub mod models;
pub mod objective;
pub mod optimizer;
pub mod pipeline;
pub mod structured;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
