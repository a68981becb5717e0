//! Discrete Ricci and Ricci-harmonic flows with weighted parabolic frequency
//! diagnostics.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod estimates;
pub mod flows;
pub mod frequency;
pub mod geometry;
pub mod harness;
pub mod heat;
pub mod linalg;
pub mod measures;
pub mod quadrature;
pub mod schedule;

pub use error::{Error, Result};
