//! Non-interactive simulation toolkit: maximal correlation, Fourier analysis on
//! product spaces, regularity, Gaussian rounding and a gap decision search.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod decision;
pub mod error;
pub mod fourier;
pub mod gaussian;
mod linalg;
pub mod maxcorr;
pub mod num;
pub mod prob;
pub mod regularity;
pub mod rounding;

pub use error::{Error, Result};
