//! Second-order sliding-mode tracking controller.
//!
//! The control law is `u = u0 + u1` per axis channel: `u0` is the flat-model
//! feedforward from [`crate::motor::inverse_dynamics`], and `u1` is a
//! discontinuous term that forces a sliding surface to zero.
//!
//! Two surfaces are available for the q channel:
//!
//! ```text
//! s_Ω = μ·e3 + ė3                      (velocity loop)
//! s_θ = μ2·e4 + μ1·e3 + ė3             (position loop, default)
//! ```
//!
//! with `e3 = Ω - Ω_r`, `e4 = θ - θ_r` and
//! `ė3 = (K e2 - f_v e3 - C_res)/J`, where `C_res` is the torque residual the
//! controller cannot attribute to its model. Once sliding holds, the position
//! error obeys `ë4 + μ1 ė4 + μ2 e4 = 0`, so `μ1` damps and `μ2` provides
//! stiffness.
//!
//! `C_res` has two sources, selected by [`RateSource`]:
//! - [`RateSource::Model`]: assume zero residual — the surfaces reduce to a
//!   pure function of the measured errors, but an unmodelled load deflects the
//!   equilibrium by `C_res/(J·μ2)`.
//! - [`RateSource::Measured`] (default): back-difference the velocity feedback
//!   to get the realized `ė3` and solve for the residual that explains it.
//!   Load steps then show up in the surface within one control period, which
//!   is what lets the switching term reject them.
//!
//! The d channel regulates `i_d` to its reference through its own surface
//! `s_d = e1` with amplitude `u0d`.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::motor::{
    inverse_dynamics, ControlInput, FlatReference, InverseDynamics, MotorParams, MotorState,
};
use crate::Result;

/// Shape of the discontinuous term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SwitchingMode {
    /// `-U0·sign(s)`. Strongest rejection, chatters at the sample rate.
    Hard,
    /// `-U0·sat(s/ε)`: linear inside the layer `|s| < ε`, continuous control.
    Boundary { epsilon: f64 },
    /// Super-twisting: `-α·|s|^½·sign(s) + w`, `ẇ = -β·sign(s)`. Continuous
    /// control with an integral channel.
    SuperTwisting { alpha: f64, beta: f64 },
}

/// Which surface drives the q channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceSelection {
    Position,
    Velocity,
}

/// How the controller obtains the realized velocity-error rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateSource {
    /// Back-difference the velocity feedback (default).
    Measured,
    /// Trust the model; zero residual torque.
    Model,
}

/// Controller tuning. All gains strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerGains {
    /// Velocity-surface gain (1/s).
    pub mu: f64,
    /// Position-surface damping gain, weights `e3`.
    pub mu1: f64,
    /// Position-surface stiffness gain, weights `e4`.
    pub mu2: f64,
    /// Generic first-order surface gains `k1·e + k2·ė`; exposed for
    /// experiments, unused by the default loops.
    pub k1: f64,
    pub k2: f64,
    /// Switching amplitude on the q channel (V).
    pub u0: f64,
    /// Switching amplitude on the d channel (V).
    pub u0d: f64,
    /// Reaching-rate threshold for the `s·ṡ ≤ -η|s|` diagnostic.
    pub eta: f64,
    pub mode: SwitchingMode,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            mu: 0.135,
            mu1: 1.2,
            mu2: 0.355,
            k1: 1.0,
            k2: 1.0,
            u0: 24.0,
            u0d: 5.0,
            eta: 0.1,
            mode: SwitchingMode::Hard,
        }
    }
}

impl ControllerGains {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("controller.mu", self.mu),
            ("controller.mu1", self.mu1),
            ("controller.mu2", self.mu2),
            ("controller.k1", self.k1),
            ("controller.k2", self.k2),
            ("controller.u0", self.u0),
            ("controller.u0d", self.u0d),
            ("controller.eta", self.eta),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::param(format!("{name} must be > 0, got {v}")));
            }
        }
        match self.mode {
            SwitchingMode::Hard => {}
            SwitchingMode::Boundary { epsilon } => {
                if !epsilon.is_finite() || epsilon <= 0.0 {
                    return Err(Error::param(format!(
                        "controller.epsilon must be > 0 for boundary mode, got {epsilon}"
                    )));
                }
            }
            SwitchingMode::SuperTwisting { alpha, beta } => {
                if !alpha.is_finite() || alpha <= 0.0 || !beta.is_finite() || beta <= 0.0 {
                    return Err(Error::param(
                        "controller.alpha and controller.beta must be > 0 for super-twisting"
                            .to_string(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Component-wise tracking error `x - x_r`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrackingError {
    /// `i_d - i_dr` (A).
    pub e1: f64,
    /// `i_q - i_qr` (A).
    pub e2: f64,
    /// `Ω - Ω_r` (rad/s).
    pub e3: f64,
    /// `θ - θ_r` (rad).
    pub e4: f64,
}

/// The three surface values at one control instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SurfaceValues {
    pub s_omega: f64,
    pub s_theta: f64,
    pub s_d: f64,
}

/// One controller output with its diagnostic signals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlStep {
    pub input: ControlInput,
    pub surfaces: SurfaceValues,
    pub error: TrackingError,
    pub nominal: InverseDynamics,
    /// Torque residual used in the surfaces (N·m); zero in model mode.
    pub residual_torque: f64,
}

/// sign with `sign(0) = 0`, so a zero-error state is a fixed point.
fn sgn(s: f64) -> f64 {
    if s > 0.0 {
        1.0
    } else if s < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Tracking error against a flat reference and its resolved nominal currents.
pub fn tracking_error(
    state: &MotorState,
    reference: &FlatReference,
    nominal: &InverseDynamics,
) -> TrackingError {
    TrackingError {
        e1: state.i_d - nominal.i_d_r,
        e2: state.i_q - nominal.i_q_r,
        e3: state.omega - reference.omega_r,
        e4: state.theta - reference.theta_r,
    }
}

/// Velocity surface `s_Ω = μ·e3 + (K e2 - f_v e3 - residual)/J`.
pub fn velocity_surface(
    e: &TrackingError,
    gains: &ControllerGains,
    params: &MotorParams,
    residual_torque: f64,
) -> f64 {
    gains.mu * e.e3 + e3_rate_model(e, params, residual_torque)
}

/// Position surface `s_θ = μ2·e4 + μ1·e3 + (K e2 - f_v e3 - residual)/J`.
pub fn position_surface(
    e: &TrackingError,
    gains: &ControllerGains,
    params: &MotorParams,
    residual_torque: f64,
) -> f64 {
    gains.mu2 * e.e4 + gains.mu1 * e.e3 + e3_rate_model(e, params, residual_torque)
}

/// Generic first-order surface `k1·e + k2·ė`.
pub fn generic_surface(e: f64, e_rate: f64, k1: f64, k2: f64) -> f64 {
    k1 * e + k2 * e_rate
}

/// Velocity-error rate implied by the model: `ė3 = (K e2 - f_v e3 - C_res)/J`.
fn e3_rate_model(e: &TrackingError, params: &MotorParams, residual_torque: f64) -> f64 {
    (params.k * e.e2 - params.f_v * e.e3 - residual_torque) / params.j
}

/// Discontinuous control increment for surface value `s`.
///
/// `integral` is the super-twisting internal state `w` (ignored by the other
/// modes); advancing `w` is the caller's job.
pub fn switching_term(s: f64, mode: &SwitchingMode, amplitude: f64, integral: f64) -> f64 {
    match *mode {
        SwitchingMode::Hard => -amplitude * sgn(s),
        SwitchingMode::Boundary { epsilon } => -amplitude * (s / epsilon).clamp(-1.0, 1.0),
        SwitchingMode::SuperTwisting { alpha, .. } => -alpha * s.abs().sqrt() * sgn(s) + integral,
    }
}

/// Reaching-condition diagnostic: `s·ṡ ≤ -η·|s|`.
pub fn reaching_condition(s: f64, s_rate: f64, eta: f64) -> bool {
    s * s_rate <= -eta * s.abs()
}

/// Sum of nominal and switching parts, per channel.
pub fn compose_control(nominal: ControlInput, switching: (f64, f64)) -> ControlInput {
    ControlInput::new(nominal.v_d + switching.0, nominal.v_q + switching.1)
}

/// Stateful controller for one axis.
///
/// Owns the super-twisting integrals and the previous velocity feedback
/// sample. One instance per axis; never shared.
#[derive(Debug, Clone)]
pub struct SmcController {
    pub gains: ControllerGains,
    pub surface: SurfaceSelection,
    pub rate_source: RateSource,
    w_q: f64,
    w_d: f64,
    prev_omega_fb: Option<f64>,
}

impl SmcController {
    pub fn new(gains: ControllerGains, surface: SurfaceSelection, rate_source: RateSource) -> Self {
        Self {
            gains,
            surface,
            rate_source,
            w_q: 0.0,
            w_d: 0.0,
            prev_omega_fb: None,
        }
    }

    /// Reset internal state (super-twisting integrals, feedback history).
    pub fn reset(&mut self) {
        self.w_q = 0.0;
        self.w_d = 0.0;
        self.prev_omega_fb = None;
    }

    /// One control update.
    ///
    /// `feedback` carries whatever the controller is allowed to see: measured
    /// currents and position, and either the true or the estimated velocity.
    /// `dt` is the controller period (equal to the plant step).
    pub fn control_step(
        &mut self,
        feedback: &MotorState,
        reference: &FlatReference,
        params: &MotorParams,
        dt: f64,
    ) -> ControlStep {
        let nominal = inverse_dynamics(reference, params);
        let e = tracking_error(feedback, reference, &nominal);

        let residual_torque = match (self.rate_source, self.prev_omega_fb) {
            // No history yet, or model mode: no attributable residual.
            (RateSource::Model, _) | (RateSource::Measured, None) => 0.0,
            (RateSource::Measured, Some(prev)) => {
                let e3_rate_measured = (feedback.omega - prev) / dt - reference.accel_r;
                params.k * e.e2 - params.f_v * e.e3 - params.j * e3_rate_measured
            }
        };

        let surfaces = SurfaceValues {
            s_omega: velocity_surface(&e, &self.gains, params, residual_torque),
            s_theta: position_surface(&e, &self.gains, params, residual_torque),
            s_d: e.e1,
        };

        let s_q = match self.surface {
            SurfaceSelection::Position => surfaces.s_theta,
            SurfaceSelection::Velocity => surfaces.s_omega,
        };

        let u_q = switching_term(s_q, &self.gains.mode, self.gains.u0, self.w_q);
        let u_d = switching_term(surfaces.s_d, &self.gains.mode, self.gains.u0d, self.w_d);
        if let SwitchingMode::SuperTwisting { beta, .. } = self.gains.mode {
            self.w_q -= beta * sgn(s_q) * dt;
            self.w_d -= beta * sgn(surfaces.s_d) * dt;
        }

        self.prev_omega_fb = Some(feedback.omega);

        ControlStep {
            input: compose_control(nominal.input(), (u_d, u_q)),
            surfaces,
            error: e,
            nominal,
            residual_torque,
        }
    }
}
