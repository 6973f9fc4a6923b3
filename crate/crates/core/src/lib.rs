//! Epidemic models with random, infection-age-dependent infectivity.
//!
//! The crate covers three views of the same model:
//!
//! * [`sim`]: exact event-driven simulation of the finite population by
//!   thinning a dominating Poisson process;
//! * [`volterra`]: the deterministic large-population limit, a system of
//!   Volterra integral equations solved on a uniform grid;
//! * [`early`]: the early exponential phase, with the growth rate, the
//!   reproduction numbers and the extinction probability.
//!
//! [`covid`] holds the reported/unreported parameterization and the R0
//! heatmaps; [`registry`] maps configuration names onto the law, duration
//! and solver strategies.

// `!(x > 0.0)` style guards are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod covid;
pub mod duration;
pub mod early;
pub mod error;
pub mod infectivity;
pub mod quadrature;
pub mod registry;
pub mod sim;
pub mod trajectory;
pub mod volterra;

pub use error::{Error, Result};
pub use infectivity::{InfectivityFunction, InfectivityLaw};
pub use trajectory::{Compartment, Trajectory};
