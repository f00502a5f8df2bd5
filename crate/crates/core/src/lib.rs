//! Concentration of measure on matrix spaces over the reals, complex
//! numbers and quaternions.

#![allow(clippy::excessive_precision, clippy::inconsistent_digit_grouping, clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod bounds;
pub mod concentration;
pub mod decomp;
pub mod error;
pub mod exec;
pub mod gaussian;
pub mod sampling;
pub mod stats;

pub use algebra::{FMatrix, Field, Quat, Scalar};
pub use error::{Error, Result};
pub use exec::Exec;
