//! Rigid-body model of the combined two-quadrotor + beam vehicle.
//!
//! Attitude is parameterised by Z-X-Y Euler angles (yaw, then roll, then
//! pitch). Body rates `(p, q, r)` are expressed in the body frame. The plant
//! always uses the full Euler-rate mapping; the small-angle shortcut
//! `Θ̇ ≈ ω` lives only inside the controller.

use nalgebra::{Matrix3, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Determinant magnitude below which the Euler-rate mapping is treated as singular.
pub const SINGULAR_DET: f64 = 1e-9;

/// Flat state vector layout: `[p(3), v(3), Θ(3), ω(3)]`.
pub type StateVector = SVector<f64, 12>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EulerAngles {
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
}

impl EulerAngles {
    pub const fn new(phi: f64, theta: f64, psi: f64) -> Self {
        Self { phi, theta, psi }
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.phi, self.theta, self.psi)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    /// True when roll and pitch are both strictly inside `limit`.
    pub fn within_guard(&self, limit: f64) -> bool {
        self.phi.abs() <= limit && self.theta.abs() <= limit
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub attitude: EulerAngles,
    pub body_rates: Vector3<f64>,
}

impl Default for SystemState {
    fn default() -> Self {
        Self::at_rest(Vector3::zeros())
    }
}

impl SystemState {
    pub fn at_rest(position: Vector3<f64>) -> Self {
        Self {
            position,
            velocity: Vector3::zeros(),
            attitude: EulerAngles::default(),
            body_rates: Vector3::zeros(),
        }
    }

    pub fn to_vector(&self) -> StateVector {
        let mut x = StateVector::zeros();
        x.fixed_rows_mut::<3>(0).copy_from(&self.position);
        x.fixed_rows_mut::<3>(3).copy_from(&self.velocity);
        x.fixed_rows_mut::<3>(6).copy_from(&self.attitude.as_vector());
        x.fixed_rows_mut::<3>(9).copy_from(&self.body_rates);
        x
    }

    pub fn from_vector(x: &StateVector) -> Self {
        Self {
            position: x.fixed_rows::<3>(0).into_owned(),
            velocity: x.fixed_rows::<3>(3).into_owned(),
            attitude: EulerAngles::from_vector(&x.fixed_rows::<3>(6).into_owned()),
            body_rates: x.fixed_rows::<3>(9).into_owned(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }
}

/// Physical parameters of one quadrotor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadParams {
    pub mass: f64,
    pub inertia: Vector3<f64>,
    pub arm_length: f64,
    /// Thrust constant `k_t` in N/rpm².
    pub thrust_constant: f64,
    /// Moment constant `k_m` in N·m/rpm².
    pub moment_constant: f64,
}

impl QuadParams {
    /// Table values for the vehicle used throughout the examples. `k_t` and `k_m`
    /// are placeholders; they only feed the rotor-speed stage.
    pub fn reference() -> Self {
        Self {
            mass: 1.5,
            inertia: Vector3::new(2.9125e-2, 2.9125e-2, 5.5225e-2),
            arm_length: 0.25,
            thrust_constant: 8.54858e-6,
            moment_constant: 0.016 * 8.54858e-6,
        }
    }

    /// Ratio `k_m / k_t`.
    pub fn mu(&self) -> f64 {
        self.moment_constant / self.thrust_constant
    }

    pub fn validate(&self) -> Result<()> {
        positive("m_i", self.mass)?;
        positive_vec("J_i", &self.inertia)?;
        positive("l", self.arm_length)?;
        positive("k_t", self.thrust_constant)?;
        positive("k_m", self.moment_constant)
    }
}

/// Beam payload with a circular cross-section.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayloadParams {
    pub mass: f64,
    pub inertia: Vector3<f64>,
    pub length: f64,
    pub radius: f64,
}

impl PayloadParams {
    pub fn reference() -> Self {
        Self {
            mass: 0.5,
            inertia: Vector3::new(16.6667e-2, 6.25e-4, 16.6667e-2),
            length: 2.0,
            radius: 0.05,
        }
    }

    /// A massless payload is accepted as a degenerate case; geometry must be positive.
    pub fn validate(&self) -> Result<()> {
        non_negative("m_L", self.mass)?;
        if self.inertia.iter().any(|j| !(*j >= 0.0)) {
            return Err(SimError::invalid("J_L", "entries must be >= 0"));
        }
        positive("L", self.length)?;
        positive("r_L", self.radius)
    }
}

/// Parameters of the combined rigid vehicle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub total_mass: f64,
    /// Principal moments `(J_x, J_y, J_z)` of the whole assembly.
    pub inertia: Vector3<f64>,
    /// Payload-CoM to quadrotor-CoM offsets.
    pub d1: Vector3<f64>,
    pub d2: Vector3<f64>,
    pub linear_drag: Vector3<f64>,
    pub rotational_drag: Vector3<f64>,
    pub gravity: f64,
}

impl SystemParams {
    /// Combined vehicle with the tabulated inertia. The beam lies along the
    /// body y axis with one quadrotor at each end.
    pub fn reference() -> Self {
        Self {
            total_mass: 1.5 + 1.5 + 0.5,
            inertia: Vector3::new(3.227327, 0.061286, 3.277117),
            d1: Vector3::new(0.0, 1.0, 0.0),
            d2: Vector3::new(0.0, -1.0, 0.0),
            linear_drag: Vector3::repeat(6e-3),
            rotational_drag: Vector3::repeat(6e-3),
            gravity: 9.81,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("m_t", self.total_mass)?;
        positive_vec("J_t", &self.inertia)?;
        positive("g", self.gravity)?;
        for (name, v) in [("k_l_drag", &self.linear_drag), ("k_r_drag", &self.rotational_drag)] {
            if v.iter().any(|k| !(*k >= 0.0)) {
                return Err(SimError::invalid(name, "drag coefficients must be >= 0"));
            }
        }
        check_symmetric(&self.d1, &self.d2)
    }

    /// Copy with drag removed, used by the energy and composition oracles.
    pub fn without_drag(&self) -> Self {
        Self {
            linear_drag: Vector3::zeros(),
            rotational_drag: Vector3::zeros(),
            ..*self
        }
    }
}

/// External translational (`D_l`, N) and rotational (`D_r`, N·m) disturbances.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Disturbance {
    pub linear: Vector3<f64>,
    pub rotational: Vector3<f64>,
}

impl Disturbance {
    pub fn is_bounded_by(&self, bound: f64) -> bool {
        self.linear.norm() <= bound && self.rotational.norm() <= bound
    }
}

/// Body-to-inertial rotation for Z-X-Y Euler angles.
pub fn rotation_matrix(angles: &EulerAngles) -> Matrix3<f64> {
    let (sf, cf) = angles.phi.sin_cos();
    let (st, ct) = angles.theta.sin_cos();
    let (sp, cp) = angles.psi.sin_cos();
    Matrix3::new(
        ct * cp - sf * st * sp,
        -cf * sp,
        st * cp + sf * ct * sp,
        ct * sp + sf * st * cp,
        cf * cp,
        st * sp - sf * ct * cp,
        -cf * st,
        sf,
        cf * ct,
    )
}

/// Matrix `W(Θ)` with `ω = W(Θ) Θ̇`.
pub fn euler_rate_matrix(angles: &EulerAngles) -> Matrix3<f64> {
    let (sf, cf) = angles.phi.sin_cos();
    let (st, ct) = angles.theta.sin_cos();
    Matrix3::new(ct, 0.0, -cf * st, 0.0, 1.0, sf, st, 0.0, cf * ct)
}

pub fn body_rate_from_euler_rate(angles: &EulerAngles, euler_rate: &Vector3<f64>) -> Vector3<f64> {
    euler_rate_matrix(angles) * euler_rate
}

/// Inverse of [`body_rate_from_euler_rate`]. `det W = cos φ`, so the mapping
/// degenerates at `|φ| = π/2`.
pub fn euler_rate_from_body_rate(angles: &EulerAngles, body_rates: &Vector3<f64>) -> Result<Vector3<f64>> {
    let w = euler_rate_matrix(angles);
    let det = w.determinant();
    if det.abs() < SINGULAR_DET {
        return Err(SimError::SingularMapping { det });
    }
    let (sf, cf) = angles.phi.sin_cos();
    let (st, ct) = angles.theta.sin_cos();
    let (p, q, r) = (body_rates.x, body_rates.y, body_rates.z);
    // closed-form inverse of W
    let phi_dot = ct * p + st * r;
    let psi_dot = (-st * p + ct * r) / cf;
    let theta_dot = q - sf * psi_dot;
    Ok(Vector3::new(phi_dot, theta_dot, psi_dot))
}

/// Time derivative of the full vehicle state under total thrust `thrust`
/// (body z) and body moments `moments`.
pub fn system_derivative(
    state: &SystemState,
    thrust: f64,
    moments: &Vector3<f64>,
    disturbance: &Disturbance,
    params: &SystemParams,
) -> Result<StateVector> {
    let r = rotation_matrix(&state.attitude);
    let m = params.total_mass;
    let g = params.gravity;

    let thrust_world = r * Vector3::new(0.0, 0.0, thrust);
    let weight = Vector3::new(0.0, 0.0, m * g);
    let drag = params.linear_drag.component_mul(&state.velocity);
    let accel = (thrust_world - weight - drag + disturbance.linear) / m;

    let w = &state.body_rates;
    let j = &params.inertia;
    let gyro = w.cross(&j.component_mul(w));
    let rot_drag = params.rotational_drag.component_mul(w);
    let ang_accel = (moments - gyro - rot_drag + disturbance.rotational).component_div(j);

    let euler_rate = euler_rate_from_body_rate(&state.attitude, w)?;

    let mut dx = StateVector::zeros();
    dx.fixed_rows_mut::<3>(0).copy_from(&state.velocity);
    dx.fixed_rows_mut::<3>(3).copy_from(&accel);
    dx.fixed_rows_mut::<3>(6).copy_from(&euler_rate);
    dx.fixed_rows_mut::<3>(9).copy_from(&ang_accel);
    Ok(dx)
}

/// Translational kinetic + gravitational potential + rotational kinetic energy.
pub fn mechanical_energy(state: &SystemState, params: &SystemParams) -> f64 {
    let m = params.total_mass;
    let w = &state.body_rates;
    0.5 * m * state.velocity.norm_squared()
        + m * params.gravity * state.position.z
        + 0.5 * w.dot(&params.inertia.component_mul(w))
}

/// Mass properties assembled from the component bodies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Composition {
    pub total_mass: f64,
    /// Parallel-axis estimate of the assembly inertia about the payload CoM.
    pub parallel_axis_inertia: Vector3<f64>,
    pub d1: Vector3<f64>,
    pub d2: Vector3<f64>,
}

impl Composition {
    /// Per-axis `(estimate - configured) / configured`.
    pub fn inertia_deviation(&self, configured: &Vector3<f64>) -> Vector3<f64> {
        (self.parallel_axis_inertia - configured).component_div(configured)
    }
}

pub fn compose_system_params(
    q1: &QuadParams,
    q2: &QuadParams,
    payload: &PayloadParams,
    d1: &Vector3<f64>,
    d2: &Vector3<f64>,
) -> Result<Composition> {
    q1.validate()?;
    q2.validate()?;
    payload.validate()?;
    if q1 != q2 {
        return Err(SimError::invalid("quadrotors", "both quadrotors must be identical"));
    }
    check_symmetric(d1, d2)?;

    let offset_inertia = |m: f64, d: &Vector3<f64>| {
        Vector3::new(
            m * (d.y * d.y + d.z * d.z),
            m * (d.x * d.x + d.z * d.z),
            m * (d.x * d.x + d.y * d.y),
        )
    };
    let parallel_axis_inertia = q1.inertia
        + offset_inertia(q1.mass, d1)
        + q2.inertia
        + offset_inertia(q2.mass, d2)
        + payload.inertia;

    Ok(Composition {
        total_mass: q1.mass + q2.mass + payload.mass,
        parallel_axis_inertia,
        d1: *d1,
        d2: *d2,
    })
}

/// Position, velocity and acceleration of an attachment point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointKinematics {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
}

/// Motion of a quadrotor rigidly mounted at body offset `offset` from the
/// payload CoM. `body_rates` and `body_accel` are body-frame quantities.
pub fn rigid_link_kinematics(
    payload: &PointKinematics,
    attitude: &EulerAngles,
    body_rates: &Vector3<f64>,
    body_accel: &Vector3<f64>,
    offset: &Vector3<f64>,
) -> PointKinematics {
    let r = rotation_matrix(attitude);
    let w_x_d = body_rates.cross(offset);
    PointKinematics {
        position: payload.position + r * offset,
        velocity: payload.velocity + r * w_x_d,
        acceleration: payload.acceleration + r * (body_accel.cross(offset) + body_rates.cross(&w_x_d)),
    }
}

pub mod oracle {
    //! Component-wise Newton equations used to cross-check the lumped model.
    //! Interconnection forces exist only here.

    use super::*;

    /// Per-component inputs for the translational elimination check.
    #[derive(Clone, Copy, Debug)]
    pub struct ComponentInputs {
        pub quad_masses: [f64; 2],
        pub payload_mass: f64,
        /// Collective thrust `u_1i` of each quadrotor.
        pub quad_thrusts: [f64; 2],
        /// Force `F_i` each quadrotor exerts on the payload.
        pub link_forces: [Vector3<f64>; 2],
    }

    /// Sums quadrotor and payload momentum equations and compares the total
    /// against `m_t · v̇_s` from [`system_derivative`]. Returns the infinity norm
    /// of the residual. Drag and disturbances are ignored.
    pub fn component_dynamics_residual(
        attitude: &EulerAngles,
        inputs: &ComponentInputs,
        params: &SystemParams,
    ) -> Result<f64> {
        let g = params.gravity;
        let r = rotation_matrix(attitude);
        let e3 = Vector3::z();

        let mut momentum_rate = Vector3::zeros();
        for i in 0..2 {
            let m = inputs.quad_masses[i];
            let accel = (r * e3 * inputs.quad_thrusts[i] - e3 * m * g - inputs.link_forces[i]) / m;
            momentum_rate += m * accel;
        }
        let payload_force = inputs.link_forces[0] + inputs.link_forces[1] - e3 * inputs.payload_mass * g;
        momentum_rate += payload_force;

        let clean = params.without_drag();
        let state = SystemState {
            attitude: *attitude,
            ..SystemState::default()
        };
        let thrust = inputs.quad_thrusts[0] + inputs.quad_thrusts[1];
        let dx = system_derivative(&state, thrust, &Vector3::zeros(), &Disturbance::default(), &clean)?;
        let lumped = dx.fixed_rows::<3>(3) * clean.total_mass;
        Ok((momentum_rate - lumped).amax())
    }
}

fn check_symmetric(d1: &Vector3<f64>, d2: &Vector3<f64>) -> Result<()> {
    if (d1 + d2).amax() > 1e-12 {
        return Err(SimError::AsymmetricGeometry {
            d1: (*d1).into(),
            d2: (*d2).into(),
        });
    }
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(SimError::invalid(name, format!("must be > 0, got {v}")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(SimError::invalid(name, format!("must be >= 0, got {v}")))
    }
}

fn positive_vec(name: &str, v: &Vector3<f64>) -> Result<()> {
    if v.iter().all(|x| *x > 0.0 && x.is_finite()) {
        Ok(())
    } else {
        Err(SimError::invalid(name, "entries must be > 0"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn rotation_identity_and_yaw() {
        assert_eq!(rotation_matrix(&EulerAngles::default()), Matrix3::identity());
        // psi = pi/2: c_psi = 0, s_psi = 1 -> first column (0, 1, 0)
        let r = rotation_matrix(&EulerAngles::new(0.0, 0.0, FRAC_PI_2));
        assert_relative_eq!(r.column(0).into_owned(), Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(r.column(1).into_owned(), Vector3::new(-1.0, 0.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn rotation_is_z_x_y_product() {
        let a = EulerAngles::new(0.3, -0.2, 1.1);
        let rz = nalgebra::Rotation3::from_axis_angle(&Vector3::z_axis(), a.psi);
        let rx = nalgebra::Rotation3::from_axis_angle(&Vector3::x_axis(), a.phi);
        let ry = nalgebra::Rotation3::from_axis_angle(&Vector3::y_axis(), a.theta);
        let expected = (rz * rx * ry).into_inner();
        assert_relative_eq!(rotation_matrix(&a), expected, epsilon = 1e-14);
    }

    #[test]
    fn euler_map_identity_at_origin() {
        let rates = Vector3::new(0.4, -1.0, 2.5);
        let z = EulerAngles::default();
        assert_eq!(body_rate_from_euler_rate(&z, &rates), rates);
        assert_eq!(euler_rate_from_body_rate(&z, &rates).unwrap(), rates);
    }

    #[test]
    fn euler_map_singular_at_roll_ninety() {
        let err = euler_rate_from_body_rate(&EulerAngles::new(FRAC_PI_2, 0.0, 0.0), &Vector3::x());
        assert!(matches!(err, Err(SimError::SingularMapping { .. })));
        // pitch is not the singular axis for this sequence
        let a = EulerAngles::new(0.0, FRAC_PI_2, 0.0);
        assert_relative_eq!(euler_rate_matrix(&a).determinant(), 1.0, epsilon = 1e-15);
        assert!(euler_rate_from_body_rate(&a, &Vector3::x()).is_ok());
    }

    #[test]
    fn hover_is_equilibrium() {
        let p = SystemParams::reference();
        let s = SystemState::at_rest(Vector3::new(0.0, 0.0, 1.0));
        let dx = system_derivative(&s, p.total_mass * p.gravity, &Vector3::zeros(), &Disturbance::default(), &p)
            .unwrap();
        assert!(dx.amax() < 1e-12, "{dx}");
    }

    #[test]
    fn zero_thrust_free_fall() {
        let p = SystemParams::reference();
        let dx = system_derivative(
            &SystemState::default(),
            0.0,
            &Vector3::zeros(),
            &Disturbance::default(),
            &p,
        )
        .unwrap();
        assert_eq!(dx[5], -9.81);
    }

    #[test]
    fn total_mass_is_exact_sum() {
        let c = compose_system_params(
            &QuadParams::reference(),
            &QuadParams::reference(),
            &PayloadParams::reference(),
            &Vector3::new(0.0, 1.0, 0.0),
            &Vector3::new(0.0, -1.0, 0.0),
        )
        .unwrap();
        assert_eq!(c.total_mass, 3.5);
        assert_eq!(c.total_mass, SystemParams::reference().total_mass);
    }

    #[test]
    fn massless_payload_coincident_com_sums_quad_inertia() {
        let q = QuadParams::reference();
        let pl = PayloadParams {
            mass: 0.0,
            inertia: Vector3::zeros(),
            ..PayloadParams::reference()
        };
        let c = compose_system_params(&q, &q, &pl, &Vector3::zeros(), &Vector3::zeros()).unwrap();
        assert_eq!(c.parallel_axis_inertia, q.inertia * 2.0);
    }

    #[test]
    fn tabulated_inertia_deviation_is_reported() {
        let p = SystemParams::reference();
        let c = compose_system_params(
            &QuadParams::reference(),
            &QuadParams::reference(),
            &PayloadParams::reference(),
            &p.d1,
            &p.d2,
        )
        .unwrap();
        let dev = c.inertia_deviation(&p.inertia);
        // J_tx: 2 (0.029125 + 1.5) + 0.166667 = 3.224917 vs 3.227327
        assert_relative_eq!(c.parallel_axis_inertia.x, 3.224917, epsilon = 1e-9);
        assert!(dev.x.abs() < 1e-3);
        // z matches the table to the printed precision
        assert!(dev.z.abs() < 1e-6);
        // the pitch axis is where the table and the parallel-axis estimate disagree most
        assert!(dev.y.abs() > 0.03);
    }

    #[test]
    fn asymmetric_offsets_rejected() {
        let q = QuadParams::reference();
        let err = compose_system_params(
            &q,
            &q,
            &PayloadParams::reference(),
            &Vector3::new(0.0, 1.0, 0.0),
            &Vector3::new(0.0, -0.9, 0.0),
        );
        assert!(matches!(err, Err(SimError::AsymmetricGeometry { .. })));
    }

    #[test]
    fn static_attachment() {
        let pl = PointKinematics {
            position: Vector3::new(1.0, 2.0, 3.0),
            velocity: Vector3::new(0.1, 0.0, -0.2),
            acceleration: Vector3::zeros(),
        };
        let d = Vector3::new(0.0, 1.0, 0.0);
        let k = rigid_link_kinematics(&pl, &EulerAngles::default(), &Vector3::zeros(), &Vector3::zeros(), &d);
        assert_eq!(k.position, pl.position + d);
        assert_eq!(k.velocity, pl.velocity);
    }

    #[test]
    fn yaw_rate_moves_attachment_sideways() {
        let pl = PointKinematics {
            position: Vector3::zeros(),
            velocity: Vector3::zeros(),
            acceleration: Vector3::zeros(),
        };
        let (r, d) = (0.7, 1.3);
        let k = rigid_link_kinematics(
            &pl,
            &EulerAngles::default(),
            &Vector3::new(0.0, 0.0, r),
            &Vector3::zeros(),
            &Vector3::new(d, 0.0, 0.0),
        );
        assert_relative_eq!(k.velocity, Vector3::new(0.0, r * d, 0.0), epsilon = 1e-15);
        // centripetal acceleration points back to the payload
        assert_relative_eq!(k.acceleration, Vector3::new(-r * r * d, 0.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn oracle_hover_and_free_fall() {
        let p = SystemParams::reference();
        let g = p.gravity;
        // symmetric hover: each quad carries its own weight plus half the payload
        let hover = oracle::ComponentInputs {
            quad_masses: [1.5, 1.5],
            payload_mass: 0.5,
            quad_thrusts: [1.75 * g, 1.75 * g],
            link_forces: [Vector3::new(0.0, 0.0, 0.25 * g); 2],
        };
        let res = oracle::component_dynamics_residual(&EulerAngles::default(), &hover, &p).unwrap();
        assert!(res < 1e-10, "{res}");

        let fall = oracle::ComponentInputs {
            quad_thrusts: [0.0, 0.0],
            link_forces: [Vector3::zeros(); 2],
            ..hover
        };
        let res = oracle::component_dynamics_residual(&EulerAngles::default(), &fall, &p).unwrap();
        assert!(res < 1e-10, "{res}");
    }
}
