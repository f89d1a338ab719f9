//! heliotrack — closed-loop simulation of a sensorless dual-axis photovoltaic
//! sun tracker.
//!
//! The crate wires together:
//! - a d-q frame stepper-motor plant with a fixed-step RK4 integrator ([`motor`]),
//! - a second-order sliding-mode tracking controller ([`smc`]),
//! - a sliding-mode velocity observer that replaces the tachometer ([`observer`]),
//! - sun-ephemeris and synthetic reference trajectories plus disturbance
//!   injection ([`sun`]),
//! - a clear-sky energy-capture model for tracked-vs-fixed comparisons
//!   ([`energy`]),
//! - the closed-loop harness with CSV telemetry, metrics and parameter sweeps
//!   ([`sim`]),
//! - config file loading and validation ([`config`]).
//!
//! Everything is deterministic: the same [`sim::SimConfig`] always produces a
//! byte-identical telemetry log.

pub mod config;
pub mod energy;
pub mod error;
pub mod motor;
pub mod observer;
mod rk4;
pub mod sim;
pub mod smc;
pub mod sun;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
