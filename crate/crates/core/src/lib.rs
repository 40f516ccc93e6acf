//! Monotone-metric quantum covariances and determinant uncertainty relations.
//!
//! - [`monotone`]: operator monotone functions, their means and kernels.
//! - [`states`]: density matrices, observables and seeded samplers.
//! - [`covariance`]: spectral inner products and covariance matrices.
//! - [`inequality`]: determinant inequality checks with structured reports.
//! - [`instance`]: the JSON instance file format.
//! - [`cli`]: the `monocov` command-line front end.

#![forbid(unsafe_code)]
// `!(x >= 0.0)` rejects NaN along with negatives
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod covariance;
pub mod error;
pub mod inequality;
pub mod instance;
pub mod monotone;
pub mod states;

pub use error::{Error, Result};
