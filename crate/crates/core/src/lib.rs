// NaN must fail comparisons against tolerances, so `!(x <= tol)` is intended.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod ambient;
pub mod diffcalc;
pub mod error;
pub mod expr;
pub mod jet;
pub mod numlin;
pub mod par;
pub mod report;
pub mod runner;
pub mod scenario;
pub mod slant;
pub mod submanifold;
pub mod theorems;
pub mod warped;

pub use error::{Error, Result};
