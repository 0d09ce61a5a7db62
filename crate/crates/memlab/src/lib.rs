// literal tables keep full digits; `!(x > 0.0)` guards are meant to reject NaN
#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod approx;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod expsum;
pub mod kernels;
pub mod landscape;
pub mod numerics;
pub mod rnnsim;

pub use error::{Error, Result};
