//! Sliding-mode velocity observer.
//!
//! Reconstructs `(θ̂, Ω̂)` from the measured rotor position and quadrature
//! current, replacing the tachometer:
//!
//! ```text
//! dθ̂/dt = Ω̂ + λ1·sign(θ - θ̂)
//! dΩ̂/dt = (K i_q - f_v Ω̂ - C_r + λ2·sign_arg) / J
//! ```
//!
//! `λ1` (rad/s) dominates the velocity estimation error and drives `ε_θ → 0`
//! in finite time; `λ2` (N·m) is an injected torque that absorbs whatever load
//! the fed `C_r` misses, provided `λ2` exceeds that residual. Both conditions
//! are checked by [`validate_gains`].
//!
//! The velocity injection argument is selectable: [`InjectionMode::VelocityError`]
//! uses `sign(Ω - Ω̂)` and therefore needs the true velocity — useful only to
//! validate the observer against ground truth. [`InjectionMode::PositionError`]
//! (default) uses `sign(θ - θ̂)` and is the genuinely sensorless form: once the
//! position error sign is meaningful, it carries the same information at the
//! torque level.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::motor::{MotorParams, MotorState};
use crate::rk4::rk4_step;
use crate::Result;

/// Argument of the velocity-channel injection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectionMode {
    /// `sign(Ω - Ω̂)`; requires the true velocity (validation only).
    VelocityError,
    /// `sign(θ - θ̂)`; fully sensorless.
    PositionError,
}

/// Observer tuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObserverGains {
    /// Position-injection gain (rad/s). Must exceed the largest velocity
    /// estimation error expected on the scenario.
    pub lambda1: f64,
    /// Velocity-injection torque (N·m). Must exceed the largest load torque
    /// residual not covered by the fed `C_r`.
    pub lambda2: f64,
    pub injection: InjectionMode,
}

impl Default for ObserverGains {
    fn default() -> Self {
        Self {
            // Twice the reference velocity scale of the tracker scenarios
            // (π rad/s), and twice the nominal load torque.
            lambda1: 2.0 * std::f64::consts::PI,
            lambda2: 1.56,
            injection: InjectionMode::PositionError,
        }
    }
}

impl ObserverGains {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("observer.lambda1", self.lambda1),
            ("observer.lambda2", self.lambda2),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::param(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Estimated position and velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ObserverState {
    pub theta_hat: f64,
    pub omega_hat: f64,
}

impl ObserverState {
    pub fn is_finite(&self) -> bool {
        self.theta_hat.is_finite() && self.omega_hat.is_finite()
    }
}

/// Time derivative of [`ObserverState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverDerivative {
    pub dtheta_hat: f64,
    pub domega_hat: f64,
}

/// Estimation errors `ε_θ = θ - θ̂`, `ε_Ω = Ω - Ω̂`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EstimationError {
    pub eps_theta: f64,
    pub eps_omega: f64,
}

fn sgn(s: f64) -> f64 {
    if s > 0.0 {
        1.0
    } else if s < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Observer right-hand side.
///
/// `omega_true` is only consulted in [`InjectionMode::VelocityError`]; passing
/// `None` there is a configuration error.
#[allow(clippy::too_many_arguments)]
pub fn observer_derivative(
    obs: &ObserverState,
    theta_meas: f64,
    i_q: f64,
    omega_true: Option<f64>,
    params: &MotorParams,
    gains: &ObserverGains,
    c_r: f64,
) -> Result<ObserverDerivative> {
    gains.validate()?;
    params.validate()?;
    if !obs.is_finite() || !theta_meas.is_finite() || !i_q.is_finite() || !c_r.is_finite() {
        return Err(Error::NonFinite { what: "observer input" });
    }
    let sign_arg = match gains.injection {
        InjectionMode::VelocityError => {
            let omega = omega_true.ok_or(Error::MissingTrueVelocity)?;
            sgn(omega - obs.omega_hat)
        }
        InjectionMode::PositionError => sgn(theta_meas - obs.theta_hat),
    };
    Ok(ObserverDerivative {
        dtheta_hat: obs.omega_hat + gains.lambda1 * sgn(theta_meas - obs.theta_hat),
        domega_hat: (params.k * i_q - params.f_v * obs.omega_hat - c_r
            + gains.lambda2 * sign_arg)
            / params.j,
    })
}

/// Advance the observer one RK4 step; measurements held constant over the step.
#[allow(clippy::too_many_arguments)]
pub fn observer_step(
    obs: &ObserverState,
    theta_meas: f64,
    i_q: f64,
    omega_true: Option<f64>,
    params: &MotorParams,
    gains: &ObserverGains,
    c_r: f64,
    dt: f64,
) -> Result<ObserverState> {
    if !(dt > 0.0 && dt <= crate::motor::MAX_DT) {
        return Err(Error::InvalidTimeStep {
            dt,
            max: crate::motor::MAX_DT,
        });
    }
    // Validate inputs (and the injection mode contract) once per step.
    observer_derivative(obs, theta_meas, i_q, omega_true, params, gains, c_r)?;

    let next = rk4_step([obs.theta_hat, obs.omega_hat], dt, |x| {
        let o = ObserverState {
            theta_hat: x[0],
            omega_hat: x[1],
        };
        // Inputs are pre-validated; the RHS itself cannot fail.
        let d = observer_derivative(&o, theta_meas, i_q, omega_true, params, gains, c_r)
            .expect("validated observer inputs");
        [d.dtheta_hat, d.domega_hat]
    });
    Ok(ObserverState {
        theta_hat: next[0],
        omega_hat: next[1],
    })
}

/// Estimation error between the true plant state and the observer.
pub fn estimation_error(plant: &MotorState, obs: &ObserverState) -> EstimationError {
    EstimationError {
        eps_theta: plant.theta - obs.theta_hat,
        eps_omega: plant.omega - obs.omega_hat,
    }
}

/// Result of checking the two gain inequalities, with margins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainCheck {
    pub lambda1_ok: bool,
    /// `λ1 - max|ε_Ω|`; positive iff ok.
    pub lambda1_margin: f64,
    pub lambda2_ok: bool,
    /// `λ2 - max residual torque`; positive iff ok.
    pub lambda2_margin: f64,
}

impl GainCheck {
    pub fn ok(&self) -> bool {
        self.lambda1_ok && self.lambda2_ok
    }
}

impl std::fmt::Display for GainCheck {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "lambda1 {} (margin {:+.6})",
            if self.lambda1_ok { "ok" } else { "too small" },
            self.lambda1_margin
        )?;
        write!(
            f,
            "lambda2 {} (margin {:+.6})",
            if self.lambda2_ok { "ok" } else { "too small" },
            self.lambda2_margin
        )
    }
}

/// Check the convergence inequalities: `λ1 > max|ε_Ω|` and `λ2 > max residual`.
///
/// Both are strict; a zero margin fails.
pub fn validate_gains(gains: &ObserverGains, eps_omega_bound: f64, c_r_bound: f64) -> GainCheck {
    GainCheck {
        lambda1_ok: gains.lambda1 > eps_omega_bound,
        lambda1_margin: gains.lambda1 - eps_omega_bound,
        lambda2_ok: gains.lambda2 > c_r_bound,
        lambda2_margin: gains.lambda2 - c_r_bound,
    }
}
