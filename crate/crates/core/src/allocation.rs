//! Weighted minimum-norm distribution of the total wrench over both
//! quadrotors, and the per-quadrotor rotor mixer.

use nalgebra::{SMatrix, SVector, Vector3, Vector4};
use crate::error::{Result, SimError};

pub type WrenchMatrix = SMatrix<f64, 4, 8>;
pub type QuadInputs = SVector<f64, 8>;

/// Builds `B` by placing the two per-quadrotor blocks side by side.
/// Only the x/y components of the offsets enter `B`.
pub fn build_b(d1: &Vector3<f64>, d2: &Vector3<f64>) -> WrenchMatrix {
    let mut b = WrenchMatrix::zeros();
    for (i, d) in [d1, d2].into_iter().enumerate() {
        let c = 4 * i;
        b[(0, c)] = 1.0;
        b[(1, c)] = d.y;
        b[(1, c + 1)] = 1.0;
        b[(2, c)] = -d.x;
        b[(2, c + 2)] = 1.0;
        b[(3, c + 3)] = 1.0;
    }
    b
}

/// Diagonal of `H = sqrt(diag(c))`.
pub fn build_h(costs: &[f64; 8]) -> Result<QuadInputs> {
    if let Some(c) = costs.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
        return Err(SimError::invalid("allocation.costs", format!("coefficients must be > 0, got {c}")));
    }
    Ok(QuadInputs::from_fn(|j, _| costs[j].sqrt()))
}

#[derive(Clone, Debug)]
pub struct AllocationGeometry {
    pub b: WrenchMatrix,
    /// Diagonal entries of `H`.
    pub h: QuadInputs,
    /// Precomputed `H⁻²` diagonal.
    h_inv_sq: QuadInputs,
    normal: nalgebra::Cholesky<f64, nalgebra::Const<4>>,
}

impl AllocationGeometry {
    pub fn new(d1: &Vector3<f64>, d2: &Vector3<f64>, costs: &[f64; 8]) -> Result<Self> {
        let b = build_b(d1, d2);
        let h = build_h(costs)?;
        let h_inv_sq = h.map(|x| 1.0 / (x * x));
        let normal = (b * nalgebra::Matrix::from_diagonal(&h_inv_sq) * b.transpose())
            .cholesky()
            .ok_or(SimError::SingularAllocation)?;
        Ok(Self { b, h, h_inv_sq, normal })
    }

    pub fn cost(&self, u: &QuadInputs) -> f64 {
        self.h.component_mul(u).norm_squared()
    }

    /// `u* = H⁻² Bᵀ (B H⁻² Bᵀ)⁻¹ w`, solved through a Cholesky factorisation.
    pub fn allocate(&self, thrust: f64, moments: &Vector3<f64>) -> QuadInputs {
        let w = Vector4::new(thrust, moments.x, moments.y, moments.z);
        let lambda = self.normal.solve(&w);
        self.h_inv_sq.component_mul(&(self.b.transpose() * lambda))
    }

    pub fn wrench(&self, u: &QuadInputs) -> Vector4<f64> {
        self.b * u
    }
}

/// Forward rotor map of one quadrotor: `[u1, u2, u3, u4] = M f`.
pub fn mixer_matrix(arm_length: f64, mu: f64) -> nalgebra::Matrix4<f64> {
    let l = arm_length;
    nalgebra::Matrix4::new(
        1.0, 1.0, 1.0, 1.0, //
        0.0, l, 0.0, -l, //
        -l, 0.0, l, 0.0, //
        mu, -mu, mu, -mu,
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotorThrusts {
    /// Unclamped solution of the mixer equations.
    pub raw: Vector4<f64>,
    /// Thrusts after clamping negatives to zero.
    pub clamped: Vector4<f64>,
    pub saturated: bool,
}

/// Solves the quadrotor mixer for the four rotor thrusts.
pub fn quad_mixer_inverse(u: &Vector4<f64>, arm_length: f64, mu: f64) -> Result<RotorThrusts> {
    if !(arm_length > 0.0) || !(mu > 0.0) {
        return Err(SimError::SingularMixer);
    }
    let (t, roll, pitch, yaw) = (u[0] / 4.0, u[1] / (2.0 * arm_length), u[2] / (2.0 * arm_length), u[3] / (4.0 * mu));
    let raw = Vector4::new(t - pitch + yaw, t + roll - yaw, t + pitch + yaw, t - roll - yaw);
    let saturated = raw.iter().any(|f| *f < 0.0);
    Ok(RotorThrusts {
        raw,
        clamped: raw.map(|f| f.max(0.0)),
        saturated,
    })
}

/// `Ω = sqrt(f / k_t)` in rpm.
pub fn rotor_speeds(thrusts: &Vector4<f64>, thrust_constant: f64) -> Result<Vector4<f64>> {
    if let Some(f) = thrusts.iter().find(|f| **f < 0.0) {
        return Err(SimError::NegativeThrust(*f));
    }
    Ok(thrusts.map(|f| (f / thrust_constant).sqrt()))
}

/// Full allocation result for one control step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WrenchCommand {
    pub thrust: f64,
    pub moments: Vector3<f64>,
    pub quad_inputs: QuadInputs,
    /// Rotor thrusts `f_ji`, quadrotor 1 then quadrotor 2.
    pub rotor_thrusts: SVector<f64, 8>,
    pub rotor_speeds: SVector<f64, 8>,
    pub clamped: bool,
}

impl WrenchCommand {
    pub fn compute(
        geometry: &AllocationGeometry,
        thrust: f64,
        moments: &Vector3<f64>,
        arm_length: f64,
        thrust_constant: f64,
        mu: f64,
    ) -> Result<Self> {
        let quad_inputs = geometry.allocate(thrust, moments);
        let mut rotor_thrusts = SVector::<f64, 8>::zeros();
        let mut speeds = SVector::<f64, 8>::zeros();
        let mut clamped = false;
        for i in 0..2 {
            let u = quad_inputs.fixed_rows::<4>(4 * i).into_owned();
            let f = quad_mixer_inverse(&u, arm_length, mu)?;
            clamped |= f.saturated;
            rotor_thrusts.fixed_rows_mut::<4>(4 * i).copy_from(&f.clamped);
            speeds
                .fixed_rows_mut::<4>(4 * i)
                .copy_from(&rotor_speeds(&f.clamped, thrust_constant)?);
        }
        Ok(Self {
            thrust,
            moments: *moments,
            quad_inputs,
            rotor_thrusts,
            rotor_speeds: speeds,
            clamped,
        })
    }
}
