//! Closed-loop harness: plant + controller + observer per axis, telemetry,
//! metrics and parameter sweeps.
//!
//! The two axes carry no mechanical coupling, so each runs its own
//! plant/controller/observer stack over the same clock. One simulation is
//! strictly sequential and allocation-light; sweeps parallelize across runs.
//!
//! Determinism contract: an identical [`SimConfig`] produces a byte-identical
//! CSV log. Nothing in the loop reads wall-clock time, thread identity or any
//! other ambient state.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::motor::{integrate_step, MotorParams, MotorState, MAX_DT};
use crate::observer::{observer_step, InjectionMode, ObserverGains, ObserverState};
use crate::smc::{
    ControllerGains, RateSource, SmcController, SurfaceSelection, SwitchingMode,
};
use crate::sun::{disturbance, DisturbanceSpec, ReferenceGenerator, Scenario, Site};
use crate::Result;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Switching-mode selector in config files; parameters live alongside.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    Hard,
    Boundary,
    SuperTwisting,
}

/// Controller block of the config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSection {
    pub mu: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub k1: f64,
    pub k2: f64,
    pub u0: f64,
    pub u0d: f64,
    pub eta: f64,
    pub mode: ModeKind,
    /// Boundary-layer half width (surface units); used when `mode = "boundary"`.
    pub epsilon: f64,
    /// Super-twisting gains; used when `mode = "super_twisting"`.
    pub alpha: f64,
    pub beta: f64,
    pub surface: SurfaceSelection,
    pub rate_source: RateSource,
}

impl Default for ControllerSection {
    fn default() -> Self {
        let g = ControllerGains::default();
        Self {
            mu: g.mu,
            mu1: g.mu1,
            mu2: g.mu2,
            k1: g.k1,
            k2: g.k2,
            u0: g.u0,
            u0d: g.u0d,
            eta: g.eta,
            mode: ModeKind::Hard,
            epsilon: 0.25,
            alpha: 60.0,
            beta: 4000.0,
            surface: SurfaceSelection::Position,
            rate_source: RateSource::Measured,
        }
    }
}

impl ControllerSection {
    pub fn gains(&self) -> ControllerGains {
        ControllerGains {
            mu: self.mu,
            mu1: self.mu1,
            mu2: self.mu2,
            k1: self.k1,
            k2: self.k2,
            u0: self.u0,
            u0d: self.u0d,
            eta: self.eta,
            mode: match self.mode {
                ModeKind::Hard => SwitchingMode::Hard,
                ModeKind::Boundary => SwitchingMode::Boundary {
                    epsilon: self.epsilon,
                },
                ModeKind::SuperTwisting => SwitchingMode::SuperTwisting {
                    alpha: self.alpha,
                    beta: self.beta,
                },
            },
        }
    }
}

/// Observer block of the config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObserverSection {
    pub lambda1: f64,
    pub lambda2: f64,
    pub injection: InjectionMode,
    /// Initial estimate; defaults to the plant's rest state.
    pub theta_hat0: f64,
    pub omega_hat0: f64,
}

impl Default for ObserverSection {
    fn default() -> Self {
        let g = ObserverGains::default();
        Self {
            lambda1: g.lambda1,
            lambda2: g.lambda2,
            injection: g.injection,
            theta_hat0: 0.0,
            omega_hat0: 0.0,
        }
    }
}

impl ObserverSection {
    pub fn gains(&self) -> ObserverGains {
        ObserverGains {
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            injection: self.injection,
        }
    }

    pub fn initial_state(&self) -> ObserverState {
        ObserverState {
            theta_hat: self.theta_hat0,
            omega_hat: self.omega_hat0,
        }
    }
}

/// Full simulation configuration; every field has a working default, so an
/// empty config file is valid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Integrator and controller step (s).
    pub dt: f64,
    /// Simulated horizon (s).
    pub duration_s: f64,
    /// Shuffles sweep execution order; never affects results.
    pub seed: u64,
    /// Controller consumes the observer's velocity instead of the plant's.
    pub sensorless: bool,
    /// Optional symmetric voltage clamp (V).
    pub v_max: Option<f64>,
    /// Gear ratio between reference angle and motor angle, per axis.
    pub gear_azimuth: f64,
    pub gear_altitude: f64,
    /// Rate limit for the night-return slew (rad/s).
    pub speed_limit: f64,
    /// Sun-day profile sampling period (s).
    pub sample_dt: f64,
    pub site: Site,
    pub motor_azimuth: MotorParams,
    pub motor_altitude: MotorParams,
    pub controller: ControllerSection,
    pub observer: ObserverSection,
    pub scenario: Scenario,
    pub disturbance: Option<DisturbanceSpec>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            duration_s: 20.0,
            seed: 0,
            sensorless: true,
            v_max: None,
            gear_azimuth: 1.0,
            gear_altitude: 1.0,
            speed_limit: std::f64::consts::PI,
            sample_dt: 1.0,
            site: Site::default(),
            motor_azimuth: MotorParams::default(),
            motor_altitude: MotorParams::default(),
            controller: ControllerSection::default(),
            observer: ObserverSection::default(),
            scenario: Scenario::default(),
            disturbance: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            return Err(Error::param(format!(
                "dt must satisfy 0 < dt <= {MAX_DT}, got {}",
                self.dt
            )));
        }
        if !self.duration_s.is_finite() || self.duration_s < self.dt {
            return Err(Error::param(format!(
                "duration_s must be >= dt, got {}",
                self.duration_s
            )));
        }
        if let Some(v) = self.v_max {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::param(format!("v_max must be > 0, got {v}")));
            }
        }
        for (name, g) in [
            ("gear_azimuth", self.gear_azimuth),
            ("gear_altitude", self.gear_altitude),
        ] {
            if !g.is_finite() || g <= 0.0 {
                return Err(Error::param(format!("{name} must be > 0, got {g}")));
            }
        }
        if !(self.speed_limit > 0.0) || !self.speed_limit.is_finite() {
            return Err(Error::param(format!(
                "speed_limit must be > 0, got {}",
                self.speed_limit
            )));
        }
        if !(self.sample_dt > 0.0) || !self.sample_dt.is_finite() {
            return Err(Error::param(format!(
                "sample_dt must be > 0, got {}",
                self.sample_dt
            )));
        }
        self.site.validate()?;
        self.motor_azimuth.validate()?;
        self.motor_altitude.validate()?;
        self.controller.gains().validate()?;
        self.observer.gains().validate()?;
        if !self.observer.theta_hat0.is_finite() || !self.observer.omega_hat0.is_finite() {
            return Err(Error::NonFinite {
                what: "observer initial state",
            });
        }
        self.scenario.validate()?;
        if let Some(d) = &self.disturbance {
            d.validate()?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Telemetry log
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Azimuth,
    Altitude,
}

impl Axis {
    pub fn label(&self) -> &'static str {
        match self {
            Axis::Azimuth => "az",
            Axis::Altitude => "alt",
        }
    }
}

/// One logged instant of one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisSample {
    pub t: f64,
    pub theta_ref: f64,
    pub theta: f64,
    pub omega: f64,
    pub omega_hat: f64,
    pub theta_hat: f64,
    pub i_d: f64,
    pub i_q: f64,
    pub v_d: f64,
    pub v_q: f64,
    pub s_omega: f64,
    pub s_theta: f64,
    pub disturbance: f64,
}

/// Column header of the telemetry CSV. Fixed; downstream tooling matches it.
pub const CSV_HEADER: &str =
    "t,axis,theta_ref,theta,omega,omega_hat,theta_hat,i_d,i_q,v_d,v_q,s_omega,s_theta,disturbance";

/// Full telemetry of one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimLog {
    pub dt: f64,
    pub azimuth: Vec<AxisSample>,
    pub altitude: Vec<AxisSample>,
}

impl SimLog {
    pub fn axis(&self, axis: Axis) -> &[AxisSample] {
        match axis {
            Axis::Azimuth => &self.azimuth,
            Axis::Altitude => &self.altitude,
        }
    }

    /// Serialize with full float precision, rows interleaved by time.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.azimuth.len() * 220 + 64);
        out.push_str(CSV_HEADER);
        out.push('\n');
        for (az, alt) in self.azimuth.iter().zip(&self.altitude) {
            for (axis, s) in [(Axis::Azimuth, az), (Axis::Altitude, alt)] {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                    s.t,
                    axis.label(),
                    s.theta_ref,
                    s.theta,
                    s.omega,
                    s.omega_hat,
                    s.theta_hat,
                    s.i_d,
                    s.i_q,
                    s.v_d,
                    s.v_q,
                    s.s_omega,
                    s.s_theta,
                    s.disturbance
                ));
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

/// Test and diagnostic knobs that are not part of the experiment definition.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimOptions {
    /// Replace the plant velocity with zero wherever the controller could see
    /// it. With `sensorless = true` this must not change anything, which is
    /// exactly what the integrity check asserts.
    pub zero_omega_feed: bool,
}

pub fn run_simulation(config: &SimConfig) -> Result<SimLog> {
    run_simulation_with(config, &SimOptions::default())
}

pub fn run_simulation_with(config: &SimConfig, options: &SimOptions) -> Result<SimLog> {
    config.validate()?;

    let generator = ReferenceGenerator::new(
        config.scenario.clone(),
        &config.site,
        config.sample_dt,
        config.speed_limit,
        config.motor_azimuth.c,
        config.motor_altitude.c,
        config.gear_azimuth,
        config.gear_altitude,
    )?;

    let azimuth = run_axis(config, options, &generator, Axis::Azimuth)?;
    let altitude = run_axis(config, options, &generator, Axis::Altitude)?;
    Ok(SimLog {
        dt: config.dt,
        azimuth,
        altitude,
    })
}

fn run_axis(
    config: &SimConfig,
    options: &SimOptions,
    generator: &ReferenceGenerator,
    axis: Axis,
) -> Result<Vec<AxisSample>> {
    let params = match axis {
        Axis::Azimuth => config.motor_azimuth,
        Axis::Altitude => config.motor_altitude,
    };
    let obs_gains = config.observer.gains();
    let mut controller = SmcController::new(
        config.controller.gains(),
        config.controller.surface,
        config.controller.rate_source,
    );
    let mut state = MotorState::default();
    let mut obs = config.observer.initial_state();

    let dt = config.dt;
    let steps = (config.duration_s / dt).round().max(1.0) as usize;
    let mut samples = Vec::with_capacity(steps + 1);

    for k in 0..=steps {
        let t = k as f64 * dt;
        let reference = generator.at(t);
        let r = match axis {
            Axis::Azimuth => reference.azimuth,
            Axis::Altitude => reference.altitude,
        };
        let d = config
            .disturbance
            .as_ref()
            .map_or(0.0, |spec| disturbance(t, spec));

        // What the controller is allowed to see: measured currents and
        // position always; velocity from the observer when sensorless.
        let omega_visible = if options.zero_omega_feed {
            0.0
        } else {
            state.omega
        };
        let feedback = MotorState {
            i_d: state.i_d,
            i_q: state.i_q,
            theta: state.theta,
            omega: if config.sensorless {
                obs.omega_hat
            } else {
                omega_visible
            },
        };
        let step = controller.control_step(&feedback, &r, &params, dt);
        let input = step.input.clamped(config.v_max);

        samples.push(AxisSample {
            t,
            theta_ref: r.theta_r,
            theta: state.theta,
            omega: state.omega,
            omega_hat: obs.omega_hat,
            theta_hat: obs.theta_hat,
            i_d: state.i_d,
            i_q: state.i_q,
            v_d: input.v_d,
            v_q: input.v_q,
            s_omega: step.surfaces.s_omega,
            s_theta: step.surfaces.s_theta,
            disturbance: d,
        });
        if k == steps {
            break;
        }

        // Advance observer on measurements taken at t, then the plant.
        let omega_true = match obs_gains.injection {
            InjectionMode::VelocityError => Some(state.omega),
            InjectionMode::PositionError => None,
        };
        obs = observer_step(
            &obs,
            state.theta,
            state.i_q,
            omega_true,
            &params,
            &obs_gains,
            r.torque_r,
            dt,
        )?;
        state = integrate_step(&state, &input, params.c + d, &params, dt)?;

        check_finite(t + dt, &state, &obs)?;
    }
    Ok(samples)
}

fn check_finite(t: f64, state: &MotorState, obs: &ObserverState) -> Result<()> {
    let signal = if !state.i_d.is_finite() {
        "i_d"
    } else if !state.i_q.is_finite() {
        "i_q"
    } else if !state.theta.is_finite() {
        "theta"
    } else if !state.omega.is_finite() {
        "omega"
    } else if !obs.theta_hat.is_finite() {
        "theta_hat"
    } else if !obs.omega_hat.is_finite() {
        "omega_hat"
    } else {
        return Ok(());
    };
    Err(Error::Diverged { t, signal })
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Settling band, as a fraction of the step size.
pub const SETTLING_BAND: f64 = 0.02;

/// Quantified behaviour of one axis over one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisMetrics {
    /// Last entry into the ±2% band around the final reference; `None` if the
    /// axis is still outside at the end of the run.
    pub settling_time_s: Option<f64>,
    /// Mean |θ - θ_ref| over the last tenth of the run (rad).
    pub steady_state_error_rad: f64,
    /// RMS of Ω - Ω̂ after settling (rad/s).
    pub observer_rms_error: f64,
    /// Number of v_q sign changes over the whole run.
    pub control_sign_reversals: u64,
    /// Largest |Ω| seen over the run (rad/s).
    pub peak_omega: f64,
    /// Largest |θ - θ_ref| at or after the first nonzero disturbance (rad).
    pub max_disturbance_deviation_rad: f64,
    /// Worst time to re-enter the band after a disturbance edge; `None` when
    /// the log carries no disturbance (or an edge never recovers — then
    /// `recovered` is false).
    pub recovery_time_s: Option<f64>,
    /// False iff some disturbance edge never re-entered the band.
    pub recovered: bool,
}

/// Per-axis metrics of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub azimuth: AxisMetrics,
    pub altitude: AxisMetrics,
}

impl Metrics {
    pub fn axis(&self, axis: Axis) -> &AxisMetrics {
        match axis {
            Axis::Azimuth => &self.azimuth,
            Axis::Altitude => &self.altitude,
        }
    }
}

/// Scale floor so the band stays meaningful for zero-step references (rad).
const MIN_STEP_SCALE: f64 = 1e-3;

/// Band half-width for a log: 2% of the step size against the final reference.
pub fn settling_band(samples: &[AxisSample]) -> f64 {
    let final_ref = samples.last().map_or(0.0, |s| s.theta_ref);
    let initial = samples.first().map_or(0.0, |s| s.theta);
    SETTLING_BAND * (final_ref - initial).abs().max(MIN_STEP_SCALE)
}

pub fn compute_axis_metrics(samples: &[AxisSample]) -> AxisMetrics {
    assert!(!samples.is_empty(), "metrics need a non-empty log");
    let final_ref = samples.last().unwrap().theta_ref;
    let band = settling_band(samples);

    // Last entry into the band: scan from the end for the last sample outside.
    let mut settling_idx = Some(0);
    for (k, s) in samples.iter().enumerate().rev() {
        if (s.theta - final_ref).abs() > band {
            settling_idx = if k + 1 < samples.len() {
                Some(k + 1)
            } else {
                None // still outside at the end
            };
            break;
        }
    }
    let settling_time_s = settling_idx.map(|k| samples[k].t);

    let tail = samples.len().saturating_sub(samples.len() / 10).min(samples.len() - 1);
    let steady_state_error_rad = samples[tail..]
        .iter()
        .map(|s| (s.theta - s.theta_ref).abs())
        .sum::<f64>()
        / samples[tail..].len() as f64;

    // Observer RMS after settling; fall back to the last fifth when unsettled.
    let rms_from = settling_idx.unwrap_or(samples.len() - samples.len() / 5);
    let rms_slice = &samples[rms_from.min(samples.len() - 1)..];
    let observer_rms_error = (rms_slice
        .iter()
        .map(|s| (s.omega - s.omega_hat).powi(2))
        .sum::<f64>()
        / rms_slice.len() as f64)
        .sqrt();

    let control_sign_reversals = samples
        .windows(2)
        .filter(|w| w[0].v_q * w[1].v_q < 0.0)
        .count() as u64;

    let peak_omega = samples.iter().map(|s| s.omega.abs()).fold(0.0, f64::max);

    // Disturbance phase: from the first nonzero disturbance sample onwards.
    let onset = samples.iter().position(|s| s.disturbance != 0.0);
    let (max_disturbance_deviation_rad, recovery_time_s, recovered) = match onset {
        None => (0.0, None, true),
        Some(start) => {
            let max_dev = samples[start..]
                .iter()
                .map(|s| (s.theta - s.theta_ref).abs())
                .fold(0.0, f64::max);

            // Edges: every change of the disturbance value, onset included.
            let mut worst: Option<f64> = Some(0.0);
            let mut all_recovered = true;
            let mut k = start;
            while k < samples.len() {
                let level = samples[k].disturbance;
                let next_edge = samples[k..]
                    .iter()
                    .position(|s| s.disturbance != level)
                    .map_or(samples.len(), |p| k + p);
                let reentry = samples[k..next_edge]
                    .iter()
                    .find(|s| (s.theta - s.theta_ref).abs() <= band)
                    .map(|s| s.t - samples[k].t);
                match reentry {
                    Some(r) => worst = worst.map(|w| w.max(r)),
                    None => all_recovered = false,
                }
                k = next_edge;
            }
            (max_dev, worst, all_recovered)
        }
    };

    AxisMetrics {
        settling_time_s,
        steady_state_error_rad,
        observer_rms_error,
        control_sign_reversals,
        peak_omega,
        max_disturbance_deviation_rad,
        recovery_time_s,
        recovered,
    }
}

pub fn compute_metrics(log: &SimLog) -> Metrics {
    Metrics {
        azimuth: compute_axis_metrics(&log.azimuth),
        altitude: compute_axis_metrics(&log.altitude),
    }
}

/// Flat key-value rendering, full float precision.
pub fn format_metrics(m: &Metrics) -> String {
    let mut out = String::new();
    for (prefix, a) in [("az", &m.azimuth), ("alt", &m.altitude)] {
        out.push_str(&format!("{prefix}.settled = {}\n", a.settling_time_s.is_some()));
        if let Some(t) = a.settling_time_s {
            out.push_str(&format!("{prefix}.settling_time_s = {t}\n"));
        }
        out.push_str(&format!(
            "{prefix}.steady_state_error_rad = {}\n",
            a.steady_state_error_rad
        ));
        out.push_str(&format!(
            "{prefix}.observer_rms_error = {}\n",
            a.observer_rms_error
        ));
        out.push_str(&format!(
            "{prefix}.control_sign_reversals = {}\n",
            a.control_sign_reversals
        ));
        out.push_str(&format!("{prefix}.peak_omega = {}\n", a.peak_omega));
        out.push_str(&format!(
            "{prefix}.max_disturbance_deviation_rad = {}\n",
            a.max_disturbance_deviation_rad
        ));
        out.push_str(&format!("{prefix}.recovered = {}\n", a.recovered));
        if let Some(t) = a.recovery_time_s {
            out.push_str(&format!("{prefix}.recovery_time_s = {t}\n"));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Parameter sweeps
// ---------------------------------------------------------------------------

/// A sweep: one override table per run, merged onto a base config.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SweepGrid {
    pub runs: Vec<toml::Value>,
}

/// Outcome of one grid point.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub index: usize,
    /// The override table, re-serialized for reporting.
    pub overrides: String,
    pub outcome: std::result::Result<Metrics, String>,
}

/// Merge `patch` onto `base` recursively; tables merge, scalars replace.
fn merge_toml(base: &mut toml::Value, patch: &toml::Value) {
    match (base, patch) {
        (toml::Value::Table(b), toml::Value::Table(p)) => {
            for (key, value) in p {
                match b.get_mut(key) {
                    Some(existing) => merge_toml(existing, value),
                    None => {
                        b.insert(key.clone(), value.clone());
                    }
                }
            }
        }
        (slot, _) => *slot = patch.clone(),
    }
}

/// Apply one override table to a base config.
pub fn apply_overrides(base: &SimConfig, patch: &toml::Value) -> Result<SimConfig> {
    let mut value =
        toml::Value::try_from(base).map_err(|e| Error::config(format!("base config: {e}")))?;
    merge_toml(&mut value, patch);
    let config: SimConfig = value
        .try_into()
        .map_err(|e| Error::config(format!("override: {e}")))?;
    config.validate()?;
    Ok(config)
}

/// Run every grid point. Execution order is shuffled by `base.seed` and runs
/// execute in parallel, but results always come back in grid order and each
/// run is bitwise independent of scheduling.
pub fn sweep(base: &SimConfig, grid: &SweepGrid) -> Result<Vec<SweepRow>> {
    if grid.runs.is_empty() {
        return Err(Error::config("sweep grid has no runs"));
    }
    let mut order: Vec<usize> = (0..grid.runs.len()).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(base.seed);
    order.shuffle(&mut rng);

    let mut rows: Vec<SweepRow> = order
        .par_iter()
        .map(|&index| {
            let patch = &grid.runs[index];
            let overrides = toml::to_string(patch)
                .unwrap_or_else(|_| "<unserializable>".to_string())
                .replace('\n', "; ");
            let outcome = apply_overrides(base, patch)
                .and_then(|config| run_simulation(&config))
                .map(|log| compute_metrics(&log))
                .map_err(|e| e.to_string());
            SweepRow {
                index,
                overrides,
                outcome,
            }
        })
        .collect();
    rows.sort_by_key(|r| r.index);
    Ok(rows)
}

/// Results table as CSV; failed runs keep their row with an error message.
pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "index,status,az_settling_time_s,az_steady_state_error_rad,az_observer_rms_error,\
         az_control_sign_reversals,alt_settling_time_s,alt_steady_state_error_rad,\
         alt_observer_rms_error,alt_control_sign_reversals,detail\n",
    );
    let fmt_opt = |v: Option<f64>| v.map_or_else(|| "unsettled".to_string(), |x| x.to_string());
    for row in rows {
        match &row.outcome {
            Ok(m) => out.push_str(&format!(
                "{},ok,{},{},{},{},{},{},{},{},\"{}\"\n",
                row.index,
                fmt_opt(m.azimuth.settling_time_s),
                m.azimuth.steady_state_error_rad,
                m.azimuth.observer_rms_error,
                m.azimuth.control_sign_reversals,
                fmt_opt(m.altitude.settling_time_s),
                m.altitude.steady_state_error_rad,
                m.altitude.observer_rms_error,
                m.altitude.control_sign_reversals,
                row.overrides
            )),
            Err(e) => out.push_str(&format!(
                "{},error,,,,,,,,,\"{}: {}\"\n",
                row.index,
                row.overrides,
                e.replace('"', "'")
            )),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn short_config() -> SimConfig {
        SimConfig {
            duration_s: 0.1,
            scenario: Scenario::Step {
                azimuth_rad: 0.0,
                altitude_rad: 0.0,
            },
            ..Default::default()
        }
    }

    #[test]
    fn zero_reference_run_stays_near_zero() {
        let log = run_simulation(&short_config()).unwrap();
        for s in log.azimuth.iter().chain(&log.altitude) {
            assert!(s.theta.abs() < 5e-3, "theta {} at t={}", s.theta, s.t);
            assert!(s.omega.abs() < 1.0, "omega {} at t={}", s.omega, s.t);
        }
    }

    #[test]
    fn identical_configs_give_identical_csv() {
        let cfg = short_config();
        let a = run_simulation(&cfg).unwrap().to_csv();
        let b = run_simulation(&cfg).unwrap().to_csv();
        assert_eq!(a, b);
    }

    #[test]
    fn csv_header_is_the_documented_contract() {
        let log = run_simulation(&short_config()).unwrap();
        let csv = log.to_csv();
        assert!(csv.starts_with(
            "t,axis,theta_ref,theta,omega,omega_hat,theta_hat,i_d,i_q,v_d,v_q,s_omega,s_theta,disturbance\n"
        ));
        let lines: Vec<&str> = csv.lines().collect();
        // header + (steps+1) instants x 2 axes
        assert_eq!(lines.len(), 1 + 2 * log.azimuth.len());
        assert!(lines[1].starts_with("0,az,"));
        assert!(lines[2].starts_with("0,alt,"));
    }

    /// Synthetic exponential log: θ = 1 - e^{-t} toward reference 1. The 2%
    /// band is entered for good at t = -ln(0.02).
    #[test]
    fn settling_time_matches_the_exponential_oracle() {
        let dt = 1e-3;
        let n = 10_000;
        let samples: Vec<AxisSample> = (0..=n)
            .map(|k| {
                let t = k as f64 * dt;
                AxisSample {
                    t,
                    theta_ref: 1.0,
                    theta: 1.0 - (-t).exp(),
                    omega: 0.0,
                    omega_hat: 0.0,
                    theta_hat: 0.0,
                    i_d: 0.0,
                    i_q: 0.0,
                    v_d: 0.0,
                    v_q: 0.0,
                    s_omega: 0.0,
                    s_theta: 0.0,
                    disturbance: 0.0,
                }
            })
            .collect();
        let m = compute_axis_metrics(&samples);
        let expected = -(0.02f64).ln(); // 3.912...
        assert_relative_eq!(m.settling_time_s.unwrap(), expected, epsilon = 2.0 * dt);
    }

    #[test]
    fn perfect_tracking_log_settles_at_zero() {
        let samples: Vec<AxisSample> = (0..100)
            .map(|k| AxisSample {
                t: k as f64 * 0.01,
                theta_ref: 0.5,
                theta: 0.5,
                omega: 0.0,
                omega_hat: 0.0,
                theta_hat: 0.0,
                i_d: 0.0,
                i_q: 0.0,
                v_d: 0.0,
                v_q: 0.0,
                s_omega: 0.0,
                s_theta: 0.0,
                disturbance: 0.0,
            })
            .collect();
        let m = compute_axis_metrics(&samples);
        assert_eq!(m.settling_time_s, Some(0.0));
        assert_eq!(m.steady_state_error_rad, 0.0);
    }

    #[test]
    fn alternating_control_counts_reversals() {
        let samples: Vec<AxisSample> = (0..10)
            .map(|k| AxisSample {
                t: k as f64,
                theta_ref: 0.0,
                theta: 0.0,
                omega: 0.0,
                omega_hat: 0.0,
                theta_hat: 0.0,
                i_d: 0.0,
                i_q: 0.0,
                v_d: 0.0,
                v_q: if k % 2 == 0 { 1.0 } else { -1.0 },
                s_omega: 0.0,
                s_theta: 0.0,
                disturbance: 0.0,
            })
            .collect();
        let m = compute_axis_metrics(&samples);
        assert_eq!(m.control_sign_reversals, 9);
    }

    #[test]
    fn sweep_of_one_equals_a_single_run() {
        let mut cfg = short_config();
        cfg.duration_s = 0.05;
        let grid = SweepGrid {
            runs: vec![toml::Value::Table(Default::default())],
        };
        let rows = sweep(&cfg, &grid).unwrap();
        assert_eq!(rows.len(), 1);
        let from_sweep = rows[0].outcome.as_ref().unwrap();
        let direct = compute_metrics(&run_simulation(&cfg).unwrap());
        assert_eq!(*from_sweep, direct);
    }

    #[test]
    fn sweep_records_per_row_failures_and_continues() {
        let mut cfg = short_config();
        cfg.duration_s = 0.05;
        let bad: toml::Value = toml::from_str("[controller]\nmu = -1.0").unwrap();
        let good: toml::Value = toml::from_str("[controller]\nu0 = 12.0").unwrap();
        let rows = sweep(
            &cfg,
            &SweepGrid {
                runs: vec![bad, good],
            },
        )
        .unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].outcome.is_err());
        assert!(rows[0].outcome.as_ref().unwrap_err().contains("mu must be > 0"));
        assert!(rows[1].outcome.is_ok());
        let csv = sweep_to_csv(&rows);
        assert!(csv.lines().count() == 3);
        assert!(csv.contains("0,error"));
        assert!(csv.contains("1,ok"));
    }

    #[test]
    fn overrides_merge_nested_tables() {
        let base = SimConfig::default();
        let patch: toml::Value =
            toml::from_str("dt = 2e-4\n[controller]\nu0 = 99.0").unwrap();
        let merged = apply_overrides(&base, &patch).unwrap();
        assert_eq!(merged.dt, 2e-4);
        assert_eq!(merged.controller.u0, 99.0);
        // Untouched fields survive.
        assert_eq!(merged.controller.mu1, base.controller.mu1);
        assert_eq!(merged.motor_azimuth, base.motor_azimuth);
    }

    #[test]
    fn invalid_config_is_rejected_with_the_field_name() {
        let mut cfg = SimConfig::default();
        cfg.controller.mu = -1.0;
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("mu must be > 0"), "{err}");

        let mut cfg = SimConfig::default();
        cfg.dt = 0.0;
        assert!(cfg.validate().is_err());
    }
}
