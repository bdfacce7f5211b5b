//! Dynamics, control and simulation of two quadrotors rigidly carrying a
//! shared beam payload under operator guidance.
//!
//! The pipeline per control step is: operator force → admittance reference →
//! sliding-mode position/attitude control → wrench allocation → RK4 plant.

pub mod admittance;
pub mod allocation;
pub mod analysis;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod nftsmc;
pub mod scenarios;
pub mod sim;
pub mod telemetry;

pub use admittance::{AdmittanceConfig, AdmittanceModel, AdmittanceState};
pub use allocation::{AllocationGeometry, WrenchCommand};
pub use config::{load_scenario, ScenarioFile};
pub use dynamics::{Disturbance, EulerAngles, SystemParams, SystemState};
pub use error::{Result, SimError};
pub use nftsmc::{ControlGains, Controller, SwitchMode};
pub use sim::{run_scenario, RunSummary, ScenarioConfig, ScenarioRun, Simulation, TelemetryRecord};
pub use telemetry::LogRow;
