//! Decision-estimation coefficients on finite instances, locally private
//! and query-based interactive learners, simulated environments and an
//! experiment harness.

// `!(x > 0.0)` rejects NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod channels;
pub mod dec;
pub mod error;
pub mod environments;
pub mod estimators;
pub mod harness;
pub mod learners;
pub mod lp;
pub mod models;
pub mod prob;
pub mod rng;

pub use error::{Error, Result};
