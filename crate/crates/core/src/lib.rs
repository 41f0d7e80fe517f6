//! Prediction-correction tracking of time-varying stochastic convex programs,
//! with Kalman-style filters on top of the prediction and correction operators.
//!
//! The crate is organized bottom-up:
//!
//! - [`linalg`]: small dense kernels.
//! - [`problem`]: costs, regularizers and data streams.
//! - [`operators`]: the prediction map `Φ` and the correction residual `Ψ`.
//! - [`ekf`]: the extended-Kalman-filter tracker.
//! - [`contract`]: the fixed or scheduled gain tracker.
//! - [`design`]: worst-case bounds and LMI gain synthesis.
//! - [`harness`]: experiments, metrics and reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod contract;
pub mod design;
pub mod ekf;
pub mod harness;
pub mod error;
pub mod linalg;
pub mod operators;
pub mod problem;

pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
