// Negated comparisons such as `!(x > 0.0)` are used on purpose: they
// reject NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod basis;
pub mod cli;
pub mod delay;
pub mod design;
pub mod error;
pub mod estimators;
pub mod quad;
pub mod signal;

pub use error::{Error, Result};
