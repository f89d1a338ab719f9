//! d-q frame stepper-motor plant.
//!
//! The two tracker axes use identical, uncoupled motors. Each is modelled in
//! the rotating d-q frame:
//!
//! ```text
//! L di_d/dt = v_d - R i_d + N L Ω i_q
//! L di_q/dt = v_q - R i_q - N L Ω i_d - K Ω
//! J dΩ/dt   = K i_q - f_v Ω - C_load
//! dθ/dt     = Ω
//! ```
//!
//! The sign of the `N L Ω i_d` cross term is chosen so that the d-q cross
//! coupling is power-neutral: `v·i = R·|i|² + d/dt(½L|i|²) + K i_q Ω` holds
//! identically, and the flat-output inverse dynamics reproduce the model in
//! open loop.
//!
//! The model is flat in `(θ, i_d)`: given a reference trajectory for those two
//! outputs and its derivatives, [`inverse_dynamics`] recovers the currents and
//! voltages that make the plant follow it exactly.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::rk4::rk4_step;
use crate::Result;

/// Hard cap on the integrator step; dt above this is a configuration mistake.
pub const MAX_DT: f64 = 0.25;

/// Physical constants of one axis motor.
///
/// Defaults are the bench values of the experimental tracker motors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotorParams {
    /// Armature resistance (Ohm).
    pub r: f64,
    /// Armature inductance (H).
    pub l: f64,
    /// Rotor inertia (kg·m²).
    pub j: f64,
    /// Torque constant (N·m/A).
    pub k: f64,
    /// Viscous friction (N·m·s/rad).
    pub f_v: f64,
    /// Rotor tooth (spin) count; couples electrical and mechanical angle.
    pub n: u32,
    /// Nominal load torque (N·m).
    pub c: f64,
}

impl Default for MotorParams {
    fn default() -> Self {
        Self {
            r: 3.15,
            l: 8.15e-3,
            j: 3.0145e-4,
            k: 0.433,
            f_v: 0.0172,
            n: 50,
            c: 0.780,
        }
    }
}

impl MotorParams {
    /// Check the sign and range invariants.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("motor.r", self.r),
            ("motor.l", self.l),
            ("motor.j", self.j),
            ("motor.k", self.k),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::param(format!("{name} must be > 0, got {v}")));
            }
        }
        if !self.f_v.is_finite() || self.f_v < 0.0 {
            return Err(Error::param(format!(
                "motor.f_v must be >= 0, got {}",
                self.f_v
            )));
        }
        if self.n < 1 {
            return Err(Error::param("motor.n must be >= 1".to_string()));
        }
        if !self.c.is_finite() {
            return Err(Error::NonFinite { what: "motor.c" });
        }
        Ok(())
    }

    /// Electrical time constant L/R (s); the fastest plant mode.
    pub fn electrical_tau(&self) -> f64 {
        self.l / self.r
    }
}

/// Plant state. Serialized order is fixed as `[i_d, i_q, theta, omega]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MotorState {
    /// Direct-axis current (A).
    pub i_d: f64,
    /// Quadrature-axis current (A).
    pub i_q: f64,
    /// Rotor position (rad).
    pub theta: f64,
    /// Angular velocity (rad/s).
    pub omega: f64,
}

impl MotorState {
    pub fn is_finite(&self) -> bool {
        self.i_d.is_finite()
            && self.i_q.is_finite()
            && self.theta.is_finite()
            && self.omega.is_finite()
    }

    /// Stored magnetic plus kinetic energy (J).
    pub fn energy(&self, params: &MotorParams) -> f64 {
        0.5 * params.l * (self.i_d * self.i_d + self.i_q * self.i_q)
            + 0.5 * params.j * self.omega * self.omega
    }

    fn to_array(self) -> [f64; 4] {
        [self.i_d, self.i_q, self.theta, self.omega]
    }

    fn from_array(x: [f64; 4]) -> Self {
        Self {
            i_d: x[0],
            i_q: x[1],
            theta: x[2],
            omega: x[3],
        }
    }
}

/// d-q voltage command (V).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub v_d: f64,
    pub v_q: f64,
}

impl ControlInput {
    pub fn new(v_d: f64, v_q: f64) -> Self {
        Self { v_d, v_q }
    }

    pub fn is_finite(&self) -> bool {
        self.v_d.is_finite() && self.v_q.is_finite()
    }

    /// Symmetric actuator saturation; `v_max = None` leaves the command as is.
    pub fn clamped(self, v_max: Option<f64>) -> Self {
        match v_max {
            Some(m) => Self {
                v_d: self.v_d.clamp(-m, m),
                v_q: self.v_q.clamp(-m, m),
            },
            None => self,
        }
    }
}

/// Time derivative of [`MotorState`], same field order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorDerivative {
    pub di_d: f64,
    pub di_q: f64,
    pub dtheta: f64,
    pub domega: f64,
}

/// Reference trajectory point for the flat outputs `(θ, i_d)` of one axis.
///
/// Carries enough derivatives for the full feedforward: position up to jerk,
/// direct current up to its first derivative, and the assumed load torque with
/// its rate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FlatReference {
    /// Position reference θ_r (rad).
    pub theta_r: f64,
    /// Velocity reference Ω_r = dθ_r/dt (rad/s).
    pub omega_r: f64,
    /// Acceleration reference dΩ_r/dt (rad/s²).
    pub accel_r: f64,
    /// Jerk reference d²Ω_r/dt² (rad/s³).
    pub jerk_r: f64,
    /// Direct-current reference i_dr (A).
    pub i_d_r: f64,
    /// di_dr/dt (A/s).
    pub i_d_rate_r: f64,
    /// Load torque assumed by the feedforward, C_r (N·m).
    pub torque_r: f64,
    /// dC_r/dt (N·m/s).
    pub torque_rate_r: f64,
}

impl FlatReference {
    /// Reference holding a fixed position against a constant load.
    pub fn hold(theta_r: f64, torque_r: f64) -> Self {
        Self {
            theta_r,
            torque_r,
            ..Self::default()
        }
    }
}

/// Currents and voltages that keep the plant exactly on a flat reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseDynamics {
    pub i_d_r: f64,
    pub i_q_r: f64,
    pub v_d_r: f64,
    pub v_q_r: f64,
}

impl InverseDynamics {
    pub fn input(&self) -> ControlInput {
        ControlInput::new(self.v_d_r, self.v_q_r)
    }
}

/// Right-hand side of the plant ODE under the given input and load torque.
pub fn derivative(
    state: &MotorState,
    input: &ControlInput,
    load: f64,
    params: &MotorParams,
) -> Result<MotorDerivative> {
    if !state.is_finite() {
        return Err(Error::NonFinite { what: "state" });
    }
    if !input.is_finite() {
        return Err(Error::NonFinite { what: "input" });
    }
    if !load.is_finite() {
        return Err(Error::NonFinite { what: "load" });
    }
    params.validate()?;
    Ok(rhs(state, input, load, params))
}

fn rhs(state: &MotorState, input: &ControlInput, load: f64, p: &MotorParams) -> MotorDerivative {
    let n = f64::from(p.n);
    let cross = n * p.l * state.omega;
    MotorDerivative {
        di_d: (input.v_d - p.r * state.i_d + cross * state.i_q) / p.l,
        di_q: (input.v_q - p.r * state.i_q - cross * state.i_d - p.k * state.omega) / p.l,
        dtheta: state.omega,
        domega: (p.k * state.i_q - p.f_v * state.omega - load) / p.j,
    }
}

/// Advance the plant one fixed RK4 step with input and load held constant.
pub fn integrate_step(
    state: &MotorState,
    input: &ControlInput,
    load: f64,
    params: &MotorParams,
    dt: f64,
) -> Result<MotorState> {
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(Error::InvalidTimeStep { dt, max: MAX_DT });
    }
    // Validates params and finiteness once per step.
    derivative(state, input, load, params)?;

    let next = rk4_step(state.to_array(), dt, |x| {
        let d = rhs(&MotorState::from_array(*x), input, load, params);
        [d.di_d, d.di_q, d.dtheta, d.domega]
    });
    Ok(MotorState::from_array(next))
}

/// Flat-output feedforward: currents and voltages for a reference trajectory.
///
/// Derivation is the model run backwards: `i_qr` balances the torque equation,
/// then each voltage is read off the corresponding current equation.
pub fn inverse_dynamics(r: &FlatReference, p: &MotorParams) -> InverseDynamics {
    let n = f64::from(p.n);
    let i_q_r = (p.j * r.accel_r + p.f_v * r.omega_r + r.torque_r) / p.k;
    let i_q_rate_r = (p.j * r.jerk_r + p.f_v * r.accel_r + r.torque_rate_r) / p.k;
    let cross = n * p.l * r.omega_r;
    InverseDynamics {
        i_d_r: r.i_d_r,
        i_q_r,
        v_d_r: p.l * r.i_d_rate_r + p.r * r.i_d_r - cross * i_q_r,
        v_q_r: p.l * i_q_rate_r + p.r * i_q_r + cross * r.i_d_r + p.k * r.omega_r,
    }
}

/// Electrical power balance residual at one instant, relative to scale.
///
/// `v·i - R|i|² - L(i_d·di_d + i_q·di_q) - K i_q Ω` vanishes identically for
/// the model equations; a nonzero residual exposes a sign or bookkeeping error
/// between the logged voltages and states.
pub fn power_balance_residual(
    state: &MotorState,
    input: &ControlInput,
    load: f64,
    params: &MotorParams,
) -> Result<f64> {
    let d = derivative(state, input, load, params)?;
    let electrical = input.v_d * state.i_d + input.v_q * state.i_q;
    let resistive = params.r * (state.i_d * state.i_d + state.i_q * state.i_q);
    let magnetic = params.l * (state.i_d * d.di_d + state.i_q * d.di_q);
    let mechanical = params.k * state.i_q * state.omega;
    let residual = electrical - resistive - magnetic - mechanical;
    let scale = electrical
        .abs()
        .max(resistive.abs())
        .max(magnetic.abs())
        .max(mechanical.abs())
        .max(1.0);
    Ok(residual / scale)
}
