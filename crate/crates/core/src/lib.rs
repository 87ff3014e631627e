//! Regression calibration for a continuous exposure measured with error.
//!
//! A main study records a surrogate `Z`, the outcome `Y` and covariates; a
//! separate validation study records the true exposure `X` next to `Z`. The
//! corrected effect is the ratio of the outcome-model slope on `Z` to the
//! calibration slope of `X` on `Z`. Covariates can enter the outcome model,
//! the calibration model, both or neither, and which choice is valid (and
//! which is most efficient) depends on how the covariate relates to `X`, `Z`
//! and `Y`.
//!
//! * [`regress`]: least squares and logistic fitting.
//! * [`rsw`]: the four adjustment strategies, delta-method variances, effect modification.
//! * [`analytic`]: closed-form limits and asymptotic variances for Gaussian data.
//! * [`scenario`]: the eight covariate structures as a data-generating process.
//! * [`advisor`]: role-based adjustment advice.
//! * [`harness`]: Monte Carlo replication.
//! * [`cli`]: the `recal` command.

// NaN must fail range checks, so `!(x < bound)` is used on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod advisor;
pub mod analytic;
pub mod cli;
pub mod data;
pub mod error;
pub mod harness;
pub mod regress;
pub mod rsw;
pub mod scenario;

pub use error::{Error, Result};
