//! Numerical kernels for spectral-gap experiments on convex domains.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod experiment;
pub mod elliptic;
pub mod geometry;
pub mod grid;
pub mod linalg;
pub mod parabolic;
pub mod potential;
pub mod report;
pub mod sampling;
pub mod sturm_liouville;
pub mod two_point;

pub use error::{GapError, Result};
