//! Gaussian population risk of one-hidden-layer ReLU convolutional networks:
//! closed forms, gradient methods with convergence certificates, worst-case
//! training sets from satisfiability, and finite-sample experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conv;
pub mod empirical;
pub mod error;
pub mod exec;
pub mod hardness;
pub mod kernel;
pub mod no_overlap;
pub mod optimizer;
pub mod overlap;
pub mod shape;
pub mod verify;

pub use error::{Error, Result};
pub use exec::Execution;
