//! Poisson process approximation for sums of locally dependent point
//! processes on `[0, 1]`: exact configuration distances, count-law
//! distances, seeded samplers, renewal solvers, closed-form and Monte Carlo
//! bounds, and a verification harness.

// NaN-rejecting argument checks are written as `!(x >= 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod carrier;
pub mod count_dist;
pub mod error;
pub mod harness;
pub mod matching;
pub mod par;
pub mod processes;
pub mod renewal_kit;
pub mod stream;

pub use carrier::{CarrierPoint, Configuration};
pub use error::{Error, Result};
pub use stream::SeededStream;
