//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A physical quantity was NaN or infinite where a finite value is required.
    #[error("non-finite value for {what}")]
    NonFinite { what: &'static str },

    /// A parameter violates its documented invariant.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// Integration step size must be positive and bounded.
    #[error("time step must satisfy 0 < dt <= {max}, got {dt}")]
    InvalidTimeStep { dt: f64, max: f64 },

    /// Paper-mode observer injection needs the true velocity.
    #[error("observer injection mode 'paper' requires the true angular velocity")]
    MissingTrueVelocity,

    /// Requested date is outside the ephemeris validity window.
    #[error("date {0} is outside the supported ephemeris window (1950..=2050)")]
    EphemerisOutOfRange(String),

    /// The sun never rises or never sets on the requested day.
    #[error("no {missing} at latitude {latitude_deg} deg on {date}: {condition}")]
    PolarSun {
        condition: &'static str,
        missing: &'static str,
        latitude_deg: f64,
        date: String,
    },

    /// Denominator of an energy ratio integrated to zero.
    #[error("reference orientation collected no energy over the day (polar night?)")]
    ZeroEnergyBaseline,

    /// Config file parsing or validation failure, with the offending field.
    #[error("config error: {0}")]
    Config(String),

    /// The simulation produced a non-finite signal and was aborted.
    #[error("simulation diverged at t={t} s: {signal} became non-finite")]
    Diverged { t: f64, signal: &'static str },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParam(msg.into())
    }
}
