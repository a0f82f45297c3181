//! Stochastic day-ahead scheduling for a grid-connected microgrid.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`stochastics`] samples hourly wind speed, irradiance, air temperature
//!    and load from their forecast distributions and maps them to power.
//! 2. [`reduction`] shrinks the sampled set with fast-forward selection and
//!    moves the probability of every dropped scenario onto its nearest survivor.
//! 3. [`optimizer`] searches commitment, storage and grid-exchange decisions
//!    with a time-varying acceleration coefficient particle swarm.
//! 4. [`evaluation`] prices a schedule against a scenario and measures every
//!    constraint breach; [`pipeline`] ties the stages together for the CLI.

pub mod artifacts;
pub mod domain;
pub mod error;
pub mod evaluation;
pub mod optimizer;
pub mod pipeline;
pub mod reduction;
pub mod stochastics;

pub use error::{Error, Result};
