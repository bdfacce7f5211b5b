//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each export takes plain numbers and returns a JSON string; the page parses
//! it and draws the series on canvases.

use nalgebra::Vector3;
use serde::Serialize;
use tandemlift::admittance::{AdmittanceConfig, AdmittanceModel, AdmittanceState};
use tandemlift::allocation::{AllocationGeometry, WrenchCommand};
use tandemlift::sim::{gaussian_force, ForceProfile};
use tandemlift::{run_scenario, scenarios, Result, SystemParams};
use wasm_bindgen::prelude::*;

#[derive(Debug, Default, Serialize)]
pub struct GuidanceSeries {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub xd: Vec<f64>,
    pub yd: Vec<f64>,
    pub zd: Vec<f64>,
    pub psi: Vec<f64>,
    pub fx: Vec<f64>,
    pub fy: Vec<f64>,
    pub fz: Vec<f64>,
    pub gated: Vec<bool>,
    pub hold_resets: usize,
    pub aborted: Option<String>,
}

/// Guidance scenario with pushes scaled by `push_scale` and admittance damping `damping`.
pub fn guidance_series(push_scale: f64, damping: f64, stride: usize) -> Result<GuidanceSeries> {
    let mut cfg = scenarios::guidance();
    for f in &mut cfg.forces {
        f.amplitude *= push_scale;
    }
    cfg.admittance.damping = Vector3::repeat(damping);
    let run = run_scenario(&cfg)?;
    let mut s = GuidanceSeries {
        hold_resets: run.summary.hold_resets,
        aborted: run.summary.aborted,
        ..Default::default()
    };
    for r in run.records.iter().step_by(stride.max(1)) {
        s.t.push(r.t);
        s.x.push(r.state.position.x);
        s.y.push(r.state.position.y);
        s.z.push(r.state.position.z);
        s.xd.push(r.reference[0]);
        s.yd.push(r.reference[1]);
        s.zd.push(r.reference[2]);
        s.psi.push(r.state.attitude.psi);
        s.fx.push(r.force.x);
        s.fy.push(r.force.y);
        s.fz.push(r.force.z);
        s.gated.push(r.gated);
    }
    Ok(s)
}

#[derive(Debug, Default, Serialize)]
pub struct AdmittanceSeries {
    pub t: Vec<f64>,
    pub force: Vec<f64>,
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    /// Sampled impulse and its closed form `A σ √(2π)`.
    pub impulse: f64,
    pub impulse_exact: f64,
}

/// One-axis reference response to an ungated Gaussian push centred `5σ` in.
pub fn admittance_series(
    mass: f64,
    damping: f64,
    stiffness: f64,
    amplitude: f64,
    sigma: f64,
    duration: f64,
) -> Result<AdmittanceSeries> {
    let dt = 1e-3;
    let cfg = AdmittanceConfig {
        mass: Vector3::repeat(mass),
        damping: Vector3::repeat(damping),
        stiffness: Vector3::repeat(stiffness),
        threshold: 0.0,
    };
    let model = AdmittanceModel::new(cfg, dt)?;
    let push = ForceProfile::new(5.0 * sigma, sigma, amplitude, Vector3::x())?;
    let mut state = AdmittanceState::default();
    let mut s = AdmittanceSeries {
        impulse_exact: amplitude * sigma * (2.0 * std::f64::consts::PI).sqrt(),
        ..Default::default()
    };
    let steps = (duration / dt).round() as usize;
    for i in 0..=steps {
        let t = i as f64 * dt;
        let f = gaussian_force(t, &push);
        s.t.push(t);
        s.force.push(f.x);
        s.position.push(state.position.x);
        s.velocity.push(state.velocity.x);
        s.impulse += f.x * dt;
        state = model.step(&state, &f);
    }
    Ok(s)
}

#[derive(Debug, Serialize)]
pub struct AllocationResult {
    /// `[U1, U2, U3, U4]` of quadrotor 1 followed by quadrotor 2.
    pub inputs: Vec<f64>,
    pub rotor_thrusts: Vec<f64>,
    pub residual: f64,
    pub cost: f64,
    pub clamped: bool,
}

/// Splits a total wrench between the two quadrotors of the reference vehicle.
pub fn allocate_wrench(thrust: f64, moments: [f64; 3], costs: &[f64]) -> Result<AllocationResult> {
    let mut c = [1.0; 8];
    for (dst, src) in c.iter_mut().zip(costs) {
        *dst = *src;
    }
    let p = SystemParams::reference();
    let q = tandemlift::dynamics::QuadParams::reference();
    let geometry = AllocationGeometry::new(&p.d1, &p.d2, &c)?;
    let m = Vector3::from(moments);
    let cmd = WrenchCommand::compute(&geometry, thrust, &m, q.arm_length, q.thrust_constant, q.mu())?;
    let residual = (geometry.wrench(&cmd.quad_inputs) - nalgebra::Vector4::new(thrust, m.x, m.y, m.z)).amax();
    Ok(AllocationResult {
        inputs: cmd.quad_inputs.iter().copied().collect(),
        rotor_thrusts: cmd.rotor_thrusts.iter().copied().collect(),
        residual,
        cost: geometry.cost(&cmd.quad_inputs),
        clamped: cmd.clamped,
    })
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsValue> {
    match r {
        Ok(v) => serde_json::to_string(&v).map_err(|e| JsValue::from_str(&e.to_string())),
        Err(e) => Err(JsValue::from_str(&e.to_string())),
    }
}

#[wasm_bindgen]
pub fn guidance(push_scale: f64, damping: f64, stride: usize) -> std::result::Result<String, JsValue> {
    to_js(guidance_series(push_scale, damping, stride))
}

#[wasm_bindgen]
pub fn admittance(
    mass: f64,
    damping: f64,
    stiffness: f64,
    amplitude: f64,
    sigma: f64,
    duration: f64,
) -> std::result::Result<String, JsValue> {
    to_js(admittance_series(mass, damping, stiffness, amplitude, sigma, duration))
}

#[wasm_bindgen]
pub fn allocate(thrust: f64, mx: f64, my: f64, mz: f64, costs: Vec<f64>) -> std::result::Result<String, JsValue> {
    to_js(allocate_wrench(thrust, [mx, my, mz], &costs))
}
