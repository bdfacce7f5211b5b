//! Fixed-step closed-loop runner.
//!
//! Each step: scripted + live force → gate → admittance → position loop →
//! attitude loop → allocation → RK4 plant step. The plant is driven by the
//! controller's total wrench; the rotor stage is observational.

use nalgebra::{SVector, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::admittance::{gate_force, hold_reset, AdmittanceConfig, AdmittanceModel, AdmittanceState};
use crate::allocation::{AllocationGeometry, WrenchCommand};
use crate::analysis;
use crate::dynamics::{system_derivative, Disturbance, PayloadParams, QuadParams, SystemParams, SystemState};
use crate::error::{Result, SimError};
use crate::nftsmc::{ControlGains, Controller, PositionReference};

pub const MIN_DT: f64 = 1e-4;
pub const MAX_DT: f64 = 1e-2;
/// `|S|` at which an axis counts as having reached its surface.
pub const REACH_TOLERANCE: f64 = 1e-3;

/// Classical fourth-order Runge-Kutta step.
pub fn rk4_step<const N: usize, F>(mut f: F, x: &SVector<f64, N>, dt: f64) -> Result<SVector<f64, N>>
where
    F: FnMut(f64, &SVector<f64, N>) -> Result<SVector<f64, N>>,
{
    let k1 = f(0.0, x)?;
    let k2 = f(0.5 * dt, &(x + k1 * (0.5 * dt)))?;
    let k3 = f(0.5 * dt, &(x + k2 * (0.5 * dt)))?;
    let k4 = f(dt, &(x + k3 * dt))?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

/// Gaussian push `A exp(-(t - t0)² / 2σ²)` along a unit direction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForceProfile {
    pub t0: f64,
    pub sigma: f64,
    pub amplitude: f64,
    pub direction: Vector3<f64>,
}

impl ForceProfile {
    pub fn new(t0: f64, sigma: f64, amplitude: f64, direction: Vector3<f64>) -> Result<Self> {
        let p = Self {
            t0,
            sigma,
            amplitude,
            direction,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(SimError::invalid("sigma", format!("must be > 0, got {}", self.sigma)));
        }
        if (self.direction.norm() - 1.0).abs() > 1e-9 {
            return Err(SimError::invalid("direction", "must be a unit vector"));
        }
        if !self.t0.is_finite() || !self.amplitude.is_finite() {
            return Err(SimError::invalid("t0", "t0 and amplitude must be finite"));
        }
        Ok(())
    }
}

pub fn gaussian_force(t: f64, profile: &ForceProfile) -> Vector3<f64> {
    let z = (t - profile.t0) / profile.sigma;
    profile.direction * (profile.amplitude * (-0.5 * z * z).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DisturbanceShape {
    Constant,
    /// Zero before `t0`, full magnitude from `t0` on.
    Step { t0: f64 },
    /// `magnitude · sin(2π f (t - t0))`, starting at `t0`.
    Sinusoid { t0: f64, frequency: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceEvent {
    pub shape: DisturbanceShape,
    pub linear: Vector3<f64>,
    pub rotational: Vector3<f64>,
}

impl DisturbanceEvent {
    pub fn scale_at(&self, t: f64) -> f64 {
        match self.shape {
            DisturbanceShape::Constant => 1.0,
            DisturbanceShape::Step { t0 } => {
                if t >= t0 {
                    1.0
                } else {
                    0.0
                }
            }
            DisturbanceShape::Sinusoid { t0, frequency } => {
                if t >= t0 {
                    (2.0 * std::f64::consts::PI * frequency * (t - t0)).sin()
                } else {
                    0.0
                }
            }
        }
    }
}

pub fn disturbance_at(t: f64, events: &[DisturbanceEvent]) -> Disturbance {
    events.iter().fold(Disturbance::default(), |acc, ev| {
        let s = ev.scale_at(t);
        Disturbance {
            linear: acc.linear + ev.linear * s,
            rotational: acc.rotational + ev.rotational * s,
        }
    })
}

/// Scripted descent of the altitude reference followed by thrust cut-off.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Landing {
    pub start: f64,
    /// Descent rate of the altitude reference (m/s, positive).
    pub rate: f64,
    /// Altitude below which thrust is cut.
    pub cutoff: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub duration: f64,
    pub dt: f64,
    pub initial: SystemState,
    /// Initial hold point of the admittance reference (defaults to the initial position).
    pub reference: Option<Vector3<f64>>,
    pub forces: Vec<ForceProfile>,
    pub disturbances: Vec<DisturbanceEvent>,
    /// Bound `ϖ` the disturbance schedule must respect, when given.
    pub disturbance_bound: Option<f64>,
    pub system: SystemParams,
    pub quad: QuadParams,
    pub payload: PayloadParams,
    pub gains: ControlGains,
    pub filter_cutoff_hz: f64,
    pub admittance: AdmittanceConfig,
    pub costs: [f64; 8],
    pub landing: Option<Landing>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            duration: 10.0,
            dt: 1e-3,
            initial: SystemState::at_rest(Vector3::new(0.0, 0.0, 1.0)),
            reference: None,
            forces: Vec::new(),
            disturbances: Vec::new(),
            disturbance_bound: None,
            system: SystemParams::reference(),
            quad: QuadParams::reference(),
            payload: PayloadParams::reference(),
            gains: ControlGains::reference(),
            filter_cutoff_hz: 20.0,
            admittance: AdmittanceConfig::default(),
            costs: [1.0; 8],
            landing: None,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(MIN_DT..=MAX_DT).contains(&self.dt) {
            return Err(SimError::invalid(
                "sim.dt",
                format!("must lie in [{MIN_DT}, {MAX_DT}], got {}", self.dt),
            ));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(SimError::invalid("sim.duration", "must be > 0"));
        }
        if !self.initial.is_finite() {
            return Err(SimError::invalid("sim.initial", "must be finite"));
        }
        self.system.validate()?;
        if !(self.filter_cutoff_hz > 0.0 && self.filter_cutoff_hz.is_finite()) {
            return Err(SimError::invalid("controller.filter_cutoff_hz", "must be > 0"));
        }
        crate::allocation::build_h(&self.costs)?;
        self.quad.validate()?;
        self.gains.validate()?;
        self.admittance.validate()?;
        for f in &self.forces {
            f.validate()?;
        }
        if let Some(bound) = self.disturbance_bound {
            // worst case: every event at full magnitude simultaneously
            let worst = self.disturbances.iter().fold(Disturbance::default(), |acc, ev| Disturbance {
                linear: acc.linear + ev.linear.abs(),
                rotational: acc.rotational + ev.rotational.abs(),
            });
            if !worst.is_bounded_by(bound) {
                return Err(SimError::invalid("disturbances", format!("schedule exceeds bound {bound}")));
            }
        }
        if let Some(l) = &self.landing {
            if !(l.rate > 0.0) || !(l.cutoff >= 0.0) {
                return Err(SimError::invalid("sim.landing", "rate must be > 0 and cutoff >= 0"));
            }
        }
        Ok(())
    }

    /// Number of telemetry records a complete run produces.
    pub fn step_count(&self) -> usize {
        // guard against 10.0 / 0.001 = 9999.999...
        (self.duration / self.dt + 1e-9).floor() as usize + 1
    }
}

/// One logged control step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TelemetryRecord {
    pub t: f64,
    pub state: SystemState,
    /// `χ_d = (x_d, y_d, z_d, φ_d, θ_d, ψ_d)`.
    pub reference: Vector6<f64>,
    pub sliding: Vector6<f64>,
    pub lyapunov: Vector6<f64>,
    pub thrust: f64,
    pub moments: Vector3<f64>,
    pub quad_inputs: SVector<f64, 8>,
    pub rotor_thrusts: SVector<f64, 8>,
    pub rotor_speeds: SVector<f64, 8>,
    /// Total applied force before gating.
    pub force: Vector3<f64>,
    pub gated: bool,
    pub clamped: bool,
    pub thrust_negative: bool,
    pub hold_reset: bool,
    /// `‖B u_q - [F_t, U_t]‖∞` for this step's allocation.
    pub allocation_residual: f64,
}

/// Summary written next to the CSV log.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub dt: f64,
    pub duration: f64,
    pub steps: usize,
    pub final_time: f64,
    pub final_position_error: [f64; 3],
    pub max_abs_sliding: [f64; 6],
    /// First time each axis came within the reach tolerance of its surface.
    pub reach_times: [Option<f64>; 6],
    pub clamp_count: usize,
    pub negative_thrust_count: usize,
    pub hold_resets: usize,
    pub max_allocation_residual: f64,
    pub aborted: Option<String>,
}

pub struct ScenarioRun {
    pub records: Vec<TelemetryRecord>,
    pub summary: RunSummary,
    /// Set when the run stopped early; `records` holds everything up to the failure.
    pub error: Option<SimError>,
}

/// Stateful closed loop; [`run_scenario`] drives it headless, the live
/// service drives it step by step.
pub struct Simulation {
    cfg: ScenarioConfig,
    controller: Controller,
    admittance: AdmittanceModel,
    geometry: AllocationGeometry,
    state: SystemState,
    reference: AdmittanceState,
    step_index: u64,
    landed: bool,
}

impl Simulation {
    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let controller = Controller::new(cfg.gains, cfg.system, cfg.filter_cutoff_hz, cfg.dt)?;
        let admittance = AdmittanceModel::new(cfg.admittance, cfg.dt)?;
        let geometry = AllocationGeometry::new(&cfg.system.d1, &cfg.system.d2, &cfg.costs)?;
        let mut sim = Self {
            state: cfg.initial,
            reference: AdmittanceState::default(),
            cfg,
            controller,
            admittance,
            geometry,
            step_index: 0,
            landed: false,
        };
        sim.reset();
        Ok(sim)
    }

    pub fn reset(&mut self) {
        self.state = self.cfg.initial;
        self.reference = AdmittanceState::holding(self.cfg.reference.unwrap_or(self.cfg.initial.position));
        self.controller.reset();
        self.step_index = 0;
        self.landed = false;
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn state(&self) -> &SystemState {
        &self.state
    }

    pub fn admittance_state(&self) -> &AdmittanceState {
        &self.reference
    }

    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.cfg.dt
    }

    pub fn step_index(&self) -> u64 {
        self.step_index
    }

    pub fn geometry(&self) -> &AllocationGeometry {
        &self.geometry
    }

    pub fn scripted_force(&self, t: f64) -> Vector3<f64> {
        self.cfg.forces.iter().map(|p| gaussian_force(t, p)).sum()
    }

    /// Runs one control step with an additional operator force and advances the plant.
    pub fn step(&mut self, live_force: &Vector3<f64>) -> Result<TelemetryRecord> {
        let dt = self.cfg.dt;
        let t = self.time();
        let force = self.scripted_force(t) + live_force;
        let gated_force = gate_force(&force, self.cfg.admittance.threshold);
        let gate_open = gated_force != Vector3::zeros();

        let mut reference = self.admittance.step(&self.reference, &gated_force);
        let (next, fired) = hold_reset(&reference, gate_open);
        reference = next;
        if let Some(landing) = self.cfg.landing.filter(|l| t >= l.start) {
            let z = (self.reference.position.z - landing.rate * dt).max(0.0);
            reference.position.z = z;
            reference.hold.z = z;
            reference.velocity.z = if z > 0.0 { -landing.rate } else { 0.0 };
            reference.acceleration.z = 0.0;
            if self.state.position.z < landing.cutoff {
                self.landed = true;
            }
        }
        self.reference = reference;

        let target = PositionReference {
            position: reference.position,
            velocity: reference.velocity,
            acceleration: reference.acceleration,
        };

        let (thrust, moments, chi_d, sliding, negative) = if self.landed {
            let mut chi_d = Vector6::zeros();
            chi_d.fixed_rows_mut::<3>(0).copy_from(&reference.position);
            (0.0, Vector3::zeros(), chi_d, Vector6::zeros(), false)
        } else {
            let out = self.controller.compute(&self.state, &target)?;
            (out.thrust, out.moments, out.reference.position, out.sliding.s, out.thrust_negative)
        };

        let wrench = WrenchCommand::compute(
            &self.geometry,
            thrust,
            &moments,
            self.cfg.quad.arm_length,
            self.cfg.quad.thrust_constant,
            self.cfg.quad.mu(),
        )?;
        let residual = (self.geometry.wrench(&wrench.quad_inputs)
            - nalgebra::Vector4::new(thrust, moments.x, moments.y, moments.z))
        .amax();

        let record = TelemetryRecord {
            t,
            state: self.state,
            reference: chi_d,
            sliding,
            lyapunov: sliding.map(|s| 0.5 * s * s),
            thrust,
            moments,
            quad_inputs: wrench.quad_inputs,
            rotor_thrusts: wrench.rotor_thrusts,
            rotor_speeds: wrench.rotor_speeds,
            force,
            gated: gate_open,
            clamped: wrench.clamped,
            thrust_negative: negative,
            hold_reset: fired,
            allocation_residual: residual,
        };

        let params = self.cfg.system;
        let events = &self.cfg.disturbances;
        let x = self.state.to_vector();
        let next = rk4_step(
            |tau, x| {
                let s = SystemState::from_vector(x);
                system_derivative(&s, thrust, &moments, &disturbance_at(t + tau, events), &params)
            },
            &x,
            dt,
        )?;
        let mut next = SystemState::from_vector(&next);
        if self.landed && next.position.z <= 0.0 {
            next.position.z = 0.0;
            next.velocity = Vector3::zeros();
            next.body_rates = Vector3::zeros();
        }
        if !next.is_finite() {
            return Err(SimError::NonFinite { t: t + dt });
        }
        self.state = next;
        self.step_index += 1;
        Ok(record)
    }
}

/// Runs a scenario headless. Aborts keep every record produced before the failure.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioRun> {
    let mut sim = Simulation::new(cfg.clone())?;
    let n = cfg.step_count();
    let mut records = Vec::with_capacity(n);
    let mut error = None;
    for _ in 0..n {
        match sim.step(&Vector3::zeros()) {
            Ok(r) => records.push(r),
            Err(e) => {
                log::warn!("run aborted at t = {:.4}: {e}", sim.time());
                error = Some(e);
                break;
            }
        }
    }
    let summary = summarize(cfg, &records, error.as_ref());
    Ok(ScenarioRun {
        records,
        summary,
        error,
    })
}

pub fn summarize(cfg: &ScenarioConfig, records: &[TelemetryRecord], error: Option<&SimError>) -> RunSummary {
    let mut summary = RunSummary {
        dt: cfg.dt,
        duration: cfg.duration,
        steps: records.len(),
        aborted: error.map(|e| e.to_string()),
        ..Default::default()
    };
    if let Some(last) = records.last() {
        summary.final_time = last.t;
        for k in 0..3 {
            summary.final_position_error[k] = last.reference[k] - last.state.position[k];
        }
    }
    let times: Vec<f64> = records.iter().map(|r| r.t).collect();
    for k in 0..6 {
        let s: Vec<f64> = records.iter().map(|r| r.sliding[k]).collect();
        summary.max_abs_sliding[k] = s.iter().fold(0.0, |m, v| m.max(v.abs()));
        summary.reach_times[k] = analysis::first_reaching_time(&times, &s, REACH_TOLERANCE);
    }
    for r in records {
        summary.clamp_count += r.clamped as usize;
        summary.negative_thrust_count += r.thrust_negative as usize;
        summary.hold_resets += r.hold_reset as usize;
        summary.max_allocation_residual = summary.max_allocation_residual.max(r.allocation_residual);
    }
    summary
}
