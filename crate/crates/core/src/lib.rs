//! Winding numbers of planar stationary Gaussian processes: covariance models,
//! exact Gaussian computations, moment formulas, path synthesis and counting.

// `!(x < y)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod covmodel;
pub mod error;
pub mod gauss_algebra;
pub mod harness;
pub mod kernel;
pub mod moments;
pub mod pathgen;
pub mod quadrature;
pub mod rng;
pub mod stats;
pub mod winding;

pub use error::{Error, Result};
