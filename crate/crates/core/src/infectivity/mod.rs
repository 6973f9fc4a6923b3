//! Random infection-age infectivity functions and their laws.

mod function;
mod law;
mod tabulate;

pub use function::{InfectivityFunction, Profile, Segment};
pub use law::{Component, InfectivityLaw};
pub use tabulate::{duration_distributions, DurationDistributions, MeanGrid, DEFAULT_MEAN_STEP};
