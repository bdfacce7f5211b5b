//! Built-in scenarios. The same setups ship as TOML files under `scenarios/`.

use nalgebra::Vector3;

use crate::dynamics::SystemState;
use crate::sim::{ForceProfile, Landing, ScenarioConfig};

fn push(t0: f64, amplitude: f64, direction: Vector3<f64>) -> ForceProfile {
    ForceProfile {
        t0,
        sigma: 0.5,
        amplitude,
        direction,
    }
}

/// 10 s hover at 1 m with no input.
pub fn hover() -> ScenarioConfig {
    ScenarioConfig::default()
}

/// Short run with one push along each axis; used for chattering comparisons.
pub fn pulse() -> ScenarioConfig {
    ScenarioConfig {
        duration: 18.0,
        forces: vec![
            push(2.0, 3.0, Vector3::x()),
            push(7.0, 3.0, Vector3::z()),
            push(12.0, 3.0, -Vector3::y()),
        ],
        ..Default::default()
    }
}

/// Operator-guided transport: lift, two forward pushes, a sideways excursion
/// and its return, then a scripted landing.
pub fn guidance() -> ScenarioConfig {
    ScenarioConfig {
        duration: 62.0,
        initial: SystemState::at_rest(Vector3::new(0.0, 0.0, 0.5)),
        forces: vec![
            push(3.0, 3.0, Vector3::z()),
            push(12.0, 3.0, Vector3::x()),
            push(20.0, 3.0, Vector3::x()),
            push(30.0, 3.0, Vector3::y()),
            push(38.0, 3.0, -Vector3::y()),
        ],
        landing: Some(Landing {
            start: 48.0,
            rate: 0.3,
            cutoff: 0.02,
        }),
        ..Default::default()
    }
}

pub fn by_name(name: &str) -> Option<ScenarioConfig> {
    match name {
        "hover" => Some(hover()),
        "pulse" => Some(pulse()),
        "guidance" => Some(guidance()),
        _ => None,
    }
}

pub const NAMES: [&str; 3] = ["hover", "pulse", "guidance"];
