//! Single-hidden-layer feedforward neural networks treated as statistical
//! models.
//!
//! The crate covers the whole inferential pipeline:
//!
//! * [`model`]: architecture, parameter layout and the forward map.
//! * [`likelihood`]: penalized Gaussian / Bernoulli log-likelihood with
//!   analytic gradient and observed information.
//! * [`fit`]: multi-restart quasi-Newton penalized maximum likelihood.
//! * [`canonical`]: sign-flip / permutation symmetries and reducibility checks.
//! * [`inference`]: sandwich covariance, Wald tests with effective degrees of
//!   freedom, and report assembly.
//! * [`effects`]: partial dependence and partial covariate-effect curves with
//!   delta-method bands.
//! * [`selection`]: BIC and cross-validated hidden-layer size selection plus
//!   the linear baseline.
//! * [`simgen`]: the Monte Carlo harness for type-I error, power, coverage and
//!   positive-definiteness studies.
//!
//! The crate is `no_std` and only needs `alloc`; file formats, the CLI and the
//! parallel runners live in the companion `fnnstat` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod canonical;
pub mod effects;
pub mod error;
pub mod fit;
pub mod inference;
pub mod likelihood;
pub mod linalg;
pub mod model;
pub mod optim;
pub mod rng;
pub mod selection;
pub mod simgen;
pub mod special;

pub use error::{Error, Result};
pub use model::{Architecture, ColumnKind, ColumnMeta, Dataset, OutputActivation, ParamVector, ResponseMeta};
