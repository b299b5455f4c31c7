//! Influence-function data attribution for logistic-regression models, the
//! influence-manipulation attacks that target it, and the downstream
//! fairness-reweighing pipeline those attacks disturb.
//!
//! The crate is organized around the attribution pipeline:
//!
//! - [`glm`]: losses, gradients, Hessian-vector products and third-derivative
//!   contractions for binary/multinomial logistic regression, plus ERM
//!   training.
//! - [`influence`]: conjugate-gradient inverse-Hessian-vector products,
//!   per-sample influence scores and their decreasing-order ranking.
//! - [`objectives`]: attack losses over influence vectors, their
//!   linearization, and the backward-friendly rewrite whose gradient avoids
//!   differentiating through the Hessian inverse.
//! - [`attack`]: projected-Adam attack drivers (single/multi target), the
//!   loss-reweighing baseline, the weight-scaling attack, and evaluation
//!   metrics.
//! - [`fairness`]: fairness/utility influence vectors, the reweighing linear
//!   programs, downstream retraining and demographic-parity evaluation.
//! - [`data`]: CSV/JSON interchange, stratified splits, synthetic generators,
//!   and the rank-impossibility construction.
//! - [`lp`]: a small bounded-variable simplex plus an independent dual
//!   search, used by the reweighing problems.
//! - [`check`]: finite-difference and dense-matrix oracles for tests.

// indexed loops over parallel arrays read better in the numeric kernels
#![allow(clippy::needless_range_loop)]

pub mod attack;
pub mod check;
pub mod data;
pub mod error;
pub mod fairness;
pub mod glm;
pub mod influence;
pub mod lp;
pub mod objectives;

pub use error::{Error, Result};
