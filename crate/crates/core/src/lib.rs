//! Renewal Hawkes processes: a self-exciting point process whose immigrants
//! arrive as a renewal process and whose points each trigger Poisson
//! offspring with kernel `h`.
//!
//! The crate builds realizations two ways, by superposing branching
//! clusters on renewal immigrants and by thinning against the conditional
//! intensity, and provides the numerics and diagnostics used to check that
//! the two agree.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cluster;
pub mod distributions;
pub mod error;
pub mod events;
pub mod pgfl;
pub mod piecewise;
pub mod renewal;
pub mod rng;
pub mod simulate;
pub mod stats;
pub mod validate;

pub use distributions::{ExcitationKernel, KernelSpec, ModelSpec, RenewalModel};
pub use error::{Result, RhpError};
pub use rng::RandomStream;
