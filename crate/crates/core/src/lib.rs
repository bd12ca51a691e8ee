//! Ranked set sampling for multiple variables, driven by partial-order theory.
//!
//! The crate builds dominance posets from multivariate element sets, enumerates
//! and uniformly samples their linear extensions, constructs three stratified
//! sampling designs on top of them, and estimates population means with
//! design-based variance estimators:
//!
//! * **MVSR** — virtual stratification by ranking on a single leading variable;
//!   the other variables ride along as concomitants.
//! * **CPOR** — stratification by the rounded mean height of each element over
//!   all linear extensions of its set's poset (unequal stratum sizes).
//! * **RPOR** — stratification by a single uniformly random linear extension
//!   per set (equal stratum sizes).
//!
//! [`sim`] wraps the designs in a reproducible Monte Carlo engine that compares
//! their efficiency against simple random sampling.

pub mod dataset;
pub mod designs;
pub mod error;
pub mod estimators;
pub mod linext;
pub mod poset;
pub mod rng;
pub mod sim;

pub use error::Error;

/// Result alias used across the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;
