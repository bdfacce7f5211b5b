//! TOML scenario files.
//!
//! Every section is optional and falls back to the tabulated vehicle,
//! controller and admittance constants. Unknown keys are rejected and every
//! error names the offending key path.

use std::path::Path;

use nalgebra::{Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::admittance::AdmittanceConfig;
use crate::dynamics::{compose_system_params, EulerAngles, PayloadParams, QuadParams, SystemParams, SystemState};
use crate::error::{Result, SimError};
use crate::nftsmc::{ControlGains, SwitchMode};
use crate::sim::{DisturbanceEvent, DisturbanceShape, ForceProfile, Landing, ScenarioConfig};

/// Relative parallel-axis mismatch above which a warning is logged.
pub const INERTIA_WARN_FRACTION: f64 = 0.05;

/// A scalar applied to every axis, or one value per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerAxis {
    Uniform(f64),
    Axes([f64; 3]),
}

impl PerAxis {
    pub fn to_vector(self) -> Vector3<f64> {
        match self {
            PerAxis::Uniform(v) => Vector3::repeat(v),
            PerAxis::Axes(a) => Vector3::from(a),
        }
    }
}

#[allow(non_snake_case)]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub m_i: f64,
    pub J_x: f64,
    pub J_y: f64,
    pub J_z: f64,
    pub l: f64,
    pub m_L: f64,
    pub J_Lx: f64,
    pub J_Ly: f64,
    pub J_Lz: f64,
    pub L: f64,
    pub r_L: f64,
    /// Assembly inertia; the parallel-axis estimate is used when omitted.
    pub J_tx: Option<f64>,
    pub J_ty: Option<f64>,
    pub J_tz: Option<f64>,
    pub k_t: f64,
    pub k_m: f64,
    pub k_l_drag: PerAxis,
    pub k_r_drag: PerAxis,
    pub g: f64,
}

impl Default for SystemSection {
    fn default() -> Self {
        let q = QuadParams::reference();
        let p = PayloadParams::reference();
        let s = SystemParams::reference();
        Self {
            m_i: q.mass,
            J_x: q.inertia.x,
            J_y: q.inertia.y,
            J_z: q.inertia.z,
            l: q.arm_length,
            m_L: p.mass,
            J_Lx: p.inertia.x,
            J_Ly: p.inertia.y,
            J_Lz: p.inertia.z,
            L: p.length,
            r_L: p.radius,
            J_tx: Some(s.inertia.x),
            J_ty: Some(s.inertia.y),
            J_tz: Some(s.inertia.z),
            k_t: q.thrust_constant,
            k_m: q.moment_constant,
            k_l_drag: PerAxis::Uniform(s.linear_drag.x),
            k_r_drag: PerAxis::Uniform(s.rotational_drag.x),
            g: s.gravity,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSection {
    pub xi: [f64; 6],
    pub eta: [f64; 6],
    pub a: f64,
    pub lambda1: [f64; 6],
    pub lambda2: [f64; 6],
    /// Boundary-layer width of the saturation switch.
    pub phi: f64,
    pub psi_d: f64,
    pub switch_mode: SwitchMode,
    pub filter_cutoff_hz: f64,
}

impl Default for ControllerSection {
    fn default() -> Self {
        let g = ControlGains::reference();
        Self {
            xi: g.xi.into(),
            eta: g.eta.into(),
            a: g.a,
            lambda1: g.lambda1.into(),
            lambda2: g.lambda2.into(),
            phi: g.boundary_layer,
            psi_d: g.yaw_setpoint,
            switch_mode: g.switch_mode,
            filter_cutoff_hz: 20.0,
        }
    }
}

#[allow(non_snake_case)]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmittanceSection {
    pub M: PerAxis,
    pub C: PerAxis,
    pub K: PerAxis,
    pub threshold: f64,
}

impl Default for AdmittanceSection {
    fn default() -> Self {
        let a = AdmittanceConfig::default();
        Self {
            M: PerAxis::Uniform(a.mass.x),
            C: PerAxis::Uniform(a.damping.x),
            K: PerAxis::Uniform(a.stiffness.x),
            threshold: a.threshold,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AllocationSection {
    pub costs: [f64; 8],
    pub d1: [f64; 3],
    pub d2: [f64; 3],
}

impl Default for AllocationSection {
    fn default() -> Self {
        let s = SystemParams::reference();
        Self {
            costs: [1.0; 8],
            d1: s.d1.into(),
            d2: s.d2.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandingSection {
    pub start: f64,
    pub rate: f64,
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
}

fn default_cutoff() -> f64 {
    0.02
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub duration: f64,
    pub dt: f64,
    pub initial_position: [f64; 3],
    pub initial_velocity: [f64; 3],
    /// `[φ, θ, ψ]` in radians.
    pub initial_attitude: [f64; 3],
    pub initial_rates: [f64; 3],
    pub reference: Option<[f64; 3]>,
    pub disturbance_bound: Option<f64>,
    pub landing: Option<LandingSection>,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            duration: 10.0,
            dt: 1e-3,
            initial_position: [0.0, 0.0, 1.0],
            initial_velocity: [0.0; 3],
            initial_attitude: [0.0; 3],
            initial_rates: [0.0; 3],
            reference: None,
            disturbance_bound: None,
            landing: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceEntry {
    pub t0: f64,
    pub sigma: f64,
    pub amplitude: f64,
    pub direction: [f64; 3],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DisturbanceKind {
    Constant,
    Step,
    Sinusoid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceEntry {
    pub kind: DisturbanceKind,
    #[serde(default)]
    pub linear: [f64; 3],
    #[serde(default)]
    pub rotational: [f64; 3],
    #[serde(default)]
    pub t0: f64,
    #[serde(default)]
    pub frequency: f64,
}

/// Parsed scenario file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFile {
    pub system: SystemSection,
    pub controller: ControllerSection,
    pub admittance: AdmittanceSection,
    pub allocation: AllocationSection,
    pub sim: SimSection,
    pub forces: Vec<ForceEntry>,
    pub disturbances: Vec<DisturbanceEntry>,
}

impl ScenarioFile {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let line = inner.span().map(|span| text[..span.start.min(text.len())].matches('\n').count() + 1);
            SimError::Config {
                path: if path == "." { "<root>".into() } else { path },
                line,
                message: inner.message().trim().to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario sections are always serialisable")
    }

    /// Builds and validates the runtime configuration.
    pub fn to_config(&self) -> Result<ScenarioConfig> {
        let s = &self.system;
        let quad = QuadParams {
            mass: s.m_i,
            inertia: Vector3::new(s.J_x, s.J_y, s.J_z),
            arm_length: s.l,
            thrust_constant: s.k_t,
            moment_constant: s.k_m,
        };
        let payload = PayloadParams {
            mass: s.m_L,
            inertia: Vector3::new(s.J_Lx, s.J_Ly, s.J_Lz),
            length: s.L,
            radius: s.r_L,
        };
        let d1 = Vector3::from(self.allocation.d1);
        let d2 = Vector3::from(self.allocation.d2);
        let composition = compose_system_params(&quad, &quad, &payload, &d1, &d2).map_err(keyed("system"))?;
        let estimate = composition.parallel_axis_inertia;
        let inertia = Vector3::new(
            s.J_tx.unwrap_or(estimate.x),
            s.J_ty.unwrap_or(estimate.y),
            s.J_tz.unwrap_or(estimate.z),
        );
        let deviation = composition.inertia_deviation(&inertia);
        if deviation.amax() > INERTIA_WARN_FRACTION {
            log::warn!(
                "configured assembly inertia differs from the parallel-axis estimate by [{:.4}, {:.4}, {:.4}]",
                deviation.x,
                deviation.y,
                deviation.z
            );
        } else {
            log::debug!("parallel-axis inertia deviation {:?}", deviation.as_slice());
        }
        let system = SystemParams {
            total_mass: composition.total_mass,
            inertia,
            d1,
            d2,
            linear_drag: s.k_l_drag.to_vector(),
            rotational_drag: s.k_r_drag.to_vector(),
            gravity: s.g,
        };

        let c = &self.controller;
        let gains = ControlGains::new(
            Vector6::from(c.xi),
            Vector6::from(c.eta),
            c.a,
            Vector6::from(c.lambda1),
            Vector6::from(c.lambda2),
            c.phi,
            c.psi_d,
            c.switch_mode,
        )
        .map_err(keyed("controller"))?;

        let a = &self.admittance;
        let admittance = AdmittanceConfig {
            mass: a.M.to_vector(),
            damping: a.C.to_vector(),
            stiffness: a.K.to_vector(),
            threshold: a.threshold,
        };

        let forces = self
            .forces
            .iter()
            .enumerate()
            .map(|(i, f)| {
                ForceProfile::new(f.t0, f.sigma, f.amplitude, Vector3::from(f.direction))
                    .map_err(keyed(&format!("forces[{i}]")))
            })
            .collect::<Result<Vec<_>>>()?;

        let disturbances = self
            .disturbances
            .iter()
            .map(|d| DisturbanceEvent {
                shape: match d.kind {
                    DisturbanceKind::Constant => DisturbanceShape::Constant,
                    DisturbanceKind::Step => DisturbanceShape::Step { t0: d.t0 },
                    DisturbanceKind::Sinusoid => DisturbanceShape::Sinusoid {
                        t0: d.t0,
                        frequency: d.frequency,
                    },
                },
                linear: Vector3::from(d.linear),
                rotational: Vector3::from(d.rotational),
            })
            .collect();

        let sim = &self.sim;
        let cfg = ScenarioConfig {
            duration: sim.duration,
            dt: sim.dt,
            initial: SystemState {
                position: Vector3::from(sim.initial_position),
                velocity: Vector3::from(sim.initial_velocity),
                attitude: EulerAngles::from_vector(&Vector3::from(sim.initial_attitude)),
                body_rates: Vector3::from(sim.initial_rates),
            },
            reference: sim.reference.map(Vector3::from),
            forces,
            disturbances,
            disturbance_bound: sim.disturbance_bound,
            system,
            quad,
            payload,
            gains,
            filter_cutoff_hz: c.filter_cutoff_hz,
            admittance,
            costs: self.allocation.costs,
            landing: sim.landing.as_ref().map(|l| Landing {
                start: l.start,
                rate: l.rate,
                cutoff: l.cutoff,
            }),
        };
        cfg.system.validate().map_err(keyed("system"))?;
        cfg.validate().map_err(keyed(""))?;
        Ok(cfg)
    }
}

/// Turns parameter errors into config errors carrying a key path.
fn keyed(section: &str) -> impl Fn(SimError) -> SimError + '_ {
    move |e| match e {
        SimError::InvalidParameter { name, reason } => SimError::Config {
            path: if section.is_empty() || name.contains('.') {
                name
            } else {
                format!("{section}.{name}")
            },
            line: None,
            message: reason,
        },
        SimError::AsymmetricGeometry { .. } => SimError::Config {
            path: "allocation.d2".into(),
            line: None,
            message: e.to_string(),
        },
        other => other,
    }
}

/// Loads and validates a scenario file in one go.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    ScenarioFile::load(path)?.to_config()
}
