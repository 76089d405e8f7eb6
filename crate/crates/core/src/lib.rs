//! Relative Yamabe constants and boundary-value Ricci flow on rotationally
//! symmetric manifolds with boundary.

// `!(x > 0.0)` rejects NaN along with non-positive values; index loops mirror
// the tensor formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod flow;
pub mod kernel;
pub mod runner;
pub mod stencil;
pub mod theorem;
pub mod warped;
pub mod yamabe;

pub use error::{LabError, Result};
