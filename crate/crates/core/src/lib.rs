#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Arrival-time distributions from repeated no-click measurements of a free
//! particle in one dimension.

pub mod chain;
pub mod cli;
pub mod detector;
pub mod distribution;
pub mod error;
pub mod grid;
pub mod hermiticity;
pub mod lab;
pub mod propagators;
pub mod scenario;

pub use error::{Error, Result};
