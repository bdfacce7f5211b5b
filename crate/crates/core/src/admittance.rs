//! Virtual mass-damper-spring turning the operator's push into a compliant
//! position reference.
//!
//! Per axis the reference obeys `M T̈_r + C Ṫ_r + K (T_r - T_d) = F`, so the
//! reference moves along the applied force. The desired point `T_d` is held
//! (zero velocity and acceleration) and is re-anchored after each push.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Reference speed below which a released push re-anchors the hold point.
pub const HOLD_SPEED: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmittanceConfig {
    pub mass: Vector3<f64>,
    pub damping: Vector3<f64>,
    pub stiffness: Vector3<f64>,
    /// Force-norm gate in newtons.
    pub threshold: f64,
}

impl Default for AdmittanceConfig {
    fn default() -> Self {
        Self {
            mass: Vector3::repeat(1.0),
            damping: Vector3::repeat(1.6),
            stiffness: Vector3::zeros(),
            threshold: 0.5,
        }
    }
}

impl AdmittanceConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("admittance.M", &self.mass), ("admittance.C", &self.damping)] {
            if v.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                return Err(SimError::invalid(name, "entries must be > 0"));
            }
        }
        if self.stiffness.iter().any(|k| !(*k >= 0.0 && k.is_finite())) {
            return Err(SimError::invalid("admittance.K", "entries must be >= 0"));
        }
        if !(self.threshold >= 0.0 && self.threshold.is_finite()) {
            return Err(SimError::invalid("admittance.threshold", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AdmittanceState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
    /// Held desired position `T_d`.
    pub hold: Vector3<f64>,
    /// Set once a gated force has acted since the last re-anchor.
    pub armed: bool,
}

impl AdmittanceState {
    pub fn holding(at: Vector3<f64>) -> Self {
        Self {
            position: at,
            hold: at,
            ..Self::default()
        }
    }
}

/// Passes `force` only when its norm exceeds `threshold`.
pub fn gate_force(force: &Vector3<f64>, threshold: f64) -> Vector3<f64> {
    if force.norm() > threshold {
        *force
    } else {
        Vector3::zeros()
    }
}

/// Exact zero-order-hold discretisation of the per-axis admittance.
#[derive(Clone, Debug)]
pub struct AdmittanceModel {
    pub config: AdmittanceConfig,
    pub dt: f64,
    transition: [Matrix2<f64>; 3],
    input: [Vector2<f64>; 3],
}

impl AdmittanceModel {
    pub fn new(config: AdmittanceConfig, dt: f64) -> Result<Self> {
        config.validate()?;
        if !(dt > 0.0) {
            return Err(SimError::invalid("dt", format!("must be > 0, got {dt}")));
        }
        let mut transition = [Matrix2::zeros(); 3];
        let mut input = [Vector2::zeros(); 3];
        for k in 0..3 {
            let (m, c, s) = (config.mass[k], config.damping[k], config.stiffness[k]);
            let aug = Matrix3::new(0.0, 1.0, 0.0, -s / m, -c / m, 1.0 / m, 0.0, 0.0, 0.0);
            let e = (aug * dt).exp();
            transition[k] = e.fixed_view::<2, 2>(0, 0).into_owned();
            input[k] = e.fixed_view::<2, 1>(0, 2).into_owned();
        }
        Ok(Self {
            config,
            dt,
            transition,
            input,
        })
    }

    /// Advances the reference by one step under the (already gated) force.
    pub fn step(&self, state: &AdmittanceState, force: &Vector3<f64>) -> AdmittanceState {
        let mut next = *state;
        for k in 0..3 {
            let x = Vector2::new(state.position[k] - state.hold[k], state.velocity[k]);
            let x = self.transition[k] * x + self.input[k] * force[k];
            next.position[k] = state.hold[k] + x[0];
            next.velocity[k] = x[1];
            next.acceleration[k] = (force[k]
                - self.config.damping[k] * x[1]
                - self.config.stiffness[k] * x[0])
                / self.config.mass[k];
        }
        if force.iter().any(|f| *f != 0.0) {
            next.armed = true;
        }
        next
    }
}

/// One-shot form of [`AdmittanceModel::step`].
pub fn admittance_step(
    state: &AdmittanceState,
    force: &Vector3<f64>,
    config: &AdmittanceConfig,
    dt: f64,
) -> Result<AdmittanceState> {
    Ok(AdmittanceModel::new(*config, dt)?.step(state, force))
}

/// Re-anchors the hold point once a push has been released and the reference
/// has slowed below [`HOLD_SPEED`]. Returns the new state and whether it fired.
pub fn hold_reset(state: &AdmittanceState, gate_open: bool) -> (AdmittanceState, bool) {
    if gate_open || !state.armed || state.velocity.norm() >= HOLD_SPEED {
        return (*state, false);
    }
    let next = AdmittanceState {
        position: state.position,
        velocity: Vector3::zeros(),
        acceleration: Vector3::zeros(),
        hold: state.position,
        armed: false,
    };
    (next, true)
}
