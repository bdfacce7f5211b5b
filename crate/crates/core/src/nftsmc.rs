//! Nonsingular fast terminal sliding-mode position and attitude control.
//!
//! Six controlled axes are ordered `(x, y, z, φ, θ, ψ)`. Every gain is a
//! per-axis vector. The attitude loop treats Euler-angle rates as equal to
//! body rates; the plant does not.

use nalgebra::{Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::dynamics::{EulerAngles, SystemParams, SystemState};
use crate::error::{Result, SimError};

/// Roll/pitch magnitude beyond which the loop refuses to continue (80°).
pub const DEFAULT_ANGLE_GUARD: f64 = 80.0 * std::f64::consts::PI / 180.0;

/// `|u_z|` below which no attitude can be extracted.
pub const MIN_VERTICAL_CONTROL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwitchMode {
    Sign,
    #[default]
    Saturation,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlGains {
    pub xi: Vector6<f64>,
    pub eta: Vector6<f64>,
    /// Exponent of the terminal term, `a >= 1`.
    pub a: f64,
    pub lambda1: Vector6<f64>,
    pub lambda2: Vector6<f64>,
    /// Boundary-layer width Φ of the saturation switch, `0 < Φ < 1`.
    pub boundary_layer: f64,
    pub yaw_setpoint: f64,
    pub switch_mode: SwitchMode,
}

impl ControlGains {
    pub fn new(
        xi: Vector6<f64>,
        eta: Vector6<f64>,
        a: f64,
        lambda1: Vector6<f64>,
        lambda2: Vector6<f64>,
        boundary_layer: f64,
        yaw_setpoint: f64,
        switch_mode: SwitchMode,
    ) -> Result<Self> {
        let gains = Self {
            xi,
            eta,
            a,
            lambda1,
            lambda2,
            boundary_layer,
            yaw_setpoint,
            switch_mode,
        };
        gains.validate()?;
        Ok(gains)
    }

    /// Tabulated controller constants with a 0.2 boundary layer.
    pub fn reference() -> Self {
        Self {
            xi: Vector6::new(4.0, 2.0, 11.0, 25.0, 80.0, 25.0),
            eta: Vector6::new(0.2, 0.1, 0.2, 0.2, 0.2, 0.2),
            a: 3.0,
            lambda1: Vector6::new(0.2, 0.1, 200.0, 40.0, 40.0, 40.0),
            lambda2: Vector6::new(2.0, 1.0, 100.0, 30.0, 30.0, 30.0),
            boundary_layer: 0.2,
            yaw_setpoint: 0.0,
            switch_mode: SwitchMode::Saturation,
        }
    }

    pub fn with_mode(mut self, mode: SwitchMode) -> Self {
        self.switch_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("xi", &self.xi),
            ("eta", &self.eta),
            ("lambda1", &self.lambda1),
            ("lambda2", &self.lambda2),
        ] {
            if let Some(bad) = v.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
                return Err(SimError::invalid(name, format!("gains must be > 0, got {bad}")));
            }
        }
        if !(self.a >= 1.0 && self.a.is_finite()) {
            return Err(SimError::invalid("a", format!("must be >= 1, got {}", self.a)));
        }
        if !(self.boundary_layer > 0.0 && self.boundary_layer < 1.0) {
            return Err(SimError::invalid(
                "phi",
                format!("must lie in (0, 1), got {}", self.boundary_layer),
            ));
        }
        if !self.yaw_setpoint.is_finite() {
            return Err(SimError::invalid("psi_d", "must be finite"));
        }
        Ok(())
    }
}

/// Sign function with `sgn(0) = 0`.
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `|e|^a sgn(e)`.
pub fn sgn_pow(e: f64, a: f64) -> f64 {
    e.abs().powf(a) * sgn(e)
}

/// Time derivative of [`sgn_pow`] along `e(t)`: `a |e|^(a-1) ė`.
/// For `a = 1` the factor is taken as 1 at `e = 0`.
pub fn sgn_pow_rate(e: f64, e_dot: f64, a: f64) -> f64 {
    if a == 1.0 {
        return e_dot;
    }
    a * e.abs().powf(a - 1.0) * e_dot
}

/// Boundary-layer saturation of `s / Φ`; the boundary itself is in the linear branch.
pub fn saturation(s: f64, boundary_layer: f64) -> f64 {
    if s.abs() <= boundary_layer {
        s / boundary_layer
    } else {
        sgn(s)
    }
}

/// Desired trajectory `χ_d` with its first two derivatives.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ReferenceSignal {
    pub position: Vector6<f64>,
    pub velocity: Vector6<f64>,
    pub acceleration: Vector6<f64>,
}

impl ReferenceSignal {
    pub fn is_finite(&self) -> bool {
        self.position.iter().chain(self.velocity.iter()).chain(self.acceleration.iter()).all(|v| v.is_finite())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TrackingError {
    pub e: Vector6<f64>,
    pub e_dot: Vector6<f64>,
}

impl TrackingError {
    /// `e = χ_d - χ`, `ė = χ̇_d - χ̇`.
    pub fn new(reference: &ReferenceSignal, actual: &Vector6<f64>, actual_rate: &Vector6<f64>) -> Self {
        Self {
            e: reference.position - actual,
            e_dot: reference.velocity - actual_rate,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SlidingState {
    pub s: Vector6<f64>,
}

impl SlidingState {
    /// Per-axis `V = S² / 2`.
    pub fn lyapunov(&self) -> Vector6<f64> {
        self.s.map(|s| 0.5 * s * s)
    }
}

/// `S = ė + ξ e + η |e|^a sgn(e)` on all six axes.
pub fn sliding_surface(err: &TrackingError, gains: &ControlGains) -> SlidingState {
    let s = Vector6::from_fn(|k, _| {
        err.e_dot[k] + gains.xi[k] * err.e[k] + gains.eta[k] * sgn_pow(err.e[k], gains.a)
    });
    SlidingState { s }
}

/// `(ξ + η a |e|^(a-1)) ė` for one axis.
fn surface_gain_term(k: usize, e: f64, e_dot: f64, gains: &ControlGains) -> f64 {
    gains.xi[k] * e_dot + gains.eta[k] * sgn_pow_rate(e, e_dot, gains.a)
}

/// Analytic `Ṡ = ë + (ξ + η a |e|^(a-1)) ė`.
pub fn surface_rate(err: &TrackingError, e_ddot: &Vector6<f64>, gains: &ControlGains) -> Vector6<f64> {
    Vector6::from_fn(|k, _| e_ddot[k] + surface_gain_term(k, err.e[k], err.e_dot[k], gains))
}

/// `λ₁ S + λ₂ sw(S)` with `sw = sgn` or the boundary-layer saturation.
pub fn switch_term(s: &Vector6<f64>, gains: &ControlGains) -> Vector6<f64> {
    Vector6::from_fn(|k, _| {
        let sw = match gains.switch_mode {
            SwitchMode::Sign => sgn(s[k]),
            SwitchMode::Saturation => saturation(s[k], gains.boundary_layer),
        };
        gains.lambda1[k] * s[k] + gains.lambda2[k] * sw
    })
}

/// Position-loop virtual controls `(u_x, u_y, u_z)` in newtons.
///
/// `err` and `sliding` must be the full six-axis quantities; only the first
/// three axes are read. `reference_accel` is `(ẍ_d, ÿ_d, z̈_d)`.
pub fn position_virtual_controls(
    state: &SystemState,
    err: &TrackingError,
    sliding: &SlidingState,
    reference_accel: &Vector3<f64>,
    gains: &ControlGains,
    params: &SystemParams,
    disturbance_estimate: &Vector3<f64>,
) -> Vector3<f64> {
    let m = params.total_mass;
    let sw = switch_term(&sliding.s, gains);
    Vector3::from_fn(|k, _| {
        let gravity = if k == 2 { params.gravity } else { 0.0 };
        m * (reference_accel[k] + gravity)
            + params.linear_drag[k] * state.velocity[k]
            - disturbance_estimate[k]
            + m * (surface_gain_term(k, err.e[k], err.e_dot[k], gains) + sw[k])
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThrustCommand {
    pub thrust: f64,
    /// Set when the commanded collective thrust is negative.
    pub negative: bool,
}

/// `U_1 = u_z / (cos φ cos θ)` using the measured attitude.
pub fn thrust_command(u_z: f64, attitude: &EulerAngles, guard: f64) -> Result<ThrustCommand> {
    if !attitude.within_guard(guard) {
        return Err(SimError::AngleGuard {
            phi: attitude.phi,
            theta: attitude.theta,
            limit: guard,
        });
    }
    let thrust = u_z / (attitude.phi.cos() * attitude.theta.cos());
    Ok(ThrustCommand {
        thrust,
        negative: thrust < 0.0,
    })
}

/// Desired roll and pitch `(φ_d, θ_d)` from the virtual controls and yaw setpoint.
pub fn desired_attitude(u: &Vector3<f64>, yaw: f64) -> Result<(f64, f64)> {
    if u.z.abs() < MIN_VERTICAL_CONTROL {
        return Err(SimError::DegenerateThrust(u.z.abs()));
    }
    let (sp, cp) = yaw.sin_cos();
    let theta_d = ((u.x * cp + u.y * sp) / u.z).atan();
    let phi_d = (theta_d.cos() * (u.x * sp - u.y * cp) / u.z).atan();
    Ok((phi_d, theta_d))
}

/// Body moments `(U_2, U_3, U_4)` from the attitude loop.
///
/// Axes 3..6 of `err`/`sliding` are read; `reference_accel` holds
/// `(φ̈_d, θ̈_d, ψ̈_d)`. Body rates stand in for Euler-angle rates.
pub fn attitude_moments(
    state: &SystemState,
    err: &TrackingError,
    sliding: &SlidingState,
    reference_accel: &Vector3<f64>,
    gains: &ControlGains,
    params: &SystemParams,
    disturbance_estimate: &Vector3<f64>,
) -> Vector3<f64> {
    let j = &params.inertia;
    let w = &state.body_rates;
    let gyro = Vector3::new(
        (j.y - j.z) / j.x * w.y * w.z,
        (j.z - j.x) / j.y * w.x * w.z,
        (j.x - j.y) / j.z * w.x * w.y,
    );
    let sw = switch_term(&sliding.s, gains);
    Vector3::from_fn(|i, _| {
        let k = i + 3;
        j[i] * (reference_accel[i] - gyro[i] + params.rotational_drag[i] / j[i] * w[i]
            - disturbance_estimate[i] / j[i])
            + j[i] * (surface_gain_term(k, err.e[k], err.e_dot[k], gains) + sw[k])
    })
}

/// Upper bound on the time to reach `S = 0` from `V(0)`:
/// `t_r = ln((2 λ₁ √V0 + γ) / γ) / λ₁` with `γ = √2 λ₂`.
pub fn reaching_time_bound(v0: f64, lambda1: f64, lambda2: f64) -> f64 {
    let gamma = std::f64::consts::SQRT_2 * lambda2;
    ((2.0 * lambda1 * v0.max(0.0).sqrt() + gamma) / gamma).abs().ln() / lambda1
}

/// Second-order low-pass filter that also yields the first and second
/// derivative of its input. Discretised exactly with the input interpolated
/// linearly between samples, so ramps are followed without extra lag.
#[derive(Clone, Debug)]
pub struct DerivativeFilter {
    natural_freq: f64,
    damping: f64,
    dt: f64,
    transition: nalgebra::Matrix2<f64>,
    input_gain: nalgebra::Matrix2<f64>,
    /// Filter state and the previous input sample.
    state: Option<(nalgebra::Vector2<f64>, f64)>,
}

impl DerivativeFilter {
    pub fn new(cutoff_hz: f64, damping: f64, dt: f64) -> Result<Self> {
        if !(cutoff_hz > 0.0) || !(damping > 0.0) || !(dt > 0.0) {
            return Err(SimError::invalid(
                "filter",
                format!("cutoff ({cutoff_hz}), damping ({damping}) and dt ({dt}) must be > 0"),
            ));
        }
        let wn = 2.0 * std::f64::consts::PI * cutoff_hz;
        // states [y, y', u, u'] with u' constant over the step
        #[rustfmt::skip]
        let m = nalgebra::Matrix4::new(
            0.0, 1.0, 0.0, 0.0,
            -wn * wn, -2.0 * damping * wn, wn * wn, 0.0,
            0.0, 0.0, 0.0, 1.0,
            0.0, 0.0, 0.0, 0.0,
        );
        let e = (m * dt).exp();
        Ok(Self {
            natural_freq: wn,
            damping,
            dt,
            transition: e.fixed_view::<2, 2>(0, 0).into_owned(),
            input_gain: e.fixed_view::<2, 2>(0, 2).into_owned(),
            state: None,
        })
    }

    pub fn reset(&mut self) {
        self.state = None;
    }

    /// Advances one sample and returns `(value, rate, acceleration)`.
    pub fn update(&mut self, input: f64) -> (f64, f64, f64) {
        let x = match self.state {
            None => nalgebra::Vector2::new(input, 0.0),
            Some((x, prev)) => {
                let u = nalgebra::Vector2::new(prev, (input - prev) / self.dt);
                self.transition * x + self.input_gain * u
            }
        };
        self.state = Some((x, input));
        let wn = self.natural_freq;
        let accel = wn * wn * (input - x[0]) - 2.0 * self.damping * wn * x[1];
        (x[0], x[1], accel)
    }
}

/// Everything the loop produced in one control step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlOutput {
    pub thrust: f64,
    pub moments: Vector3<f64>,
    pub virtual_controls: Vector3<f64>,
    pub reference: ReferenceSignal,
    pub error: TrackingError,
    pub sliding: SlidingState,
    pub thrust_negative: bool,
}

/// Translational reference handed to the position loop.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PositionReference {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
}

/// Cascaded position → attitude controller. Owns the desired-attitude
/// differentiation filters; one instance per simulation loop.
#[derive(Clone, Debug)]
pub struct Controller {
    pub gains: ControlGains,
    pub params: SystemParams,
    pub angle_guard: f64,
    pub disturbance_estimate: (Vector3<f64>, Vector3<f64>),
    filters: [DerivativeFilter; 3],
}

pub const FILTER_DAMPING: f64 = 1.0;

impl Controller {
    pub fn new(gains: ControlGains, params: SystemParams, filter_cutoff_hz: f64, dt: f64) -> Result<Self> {
        gains.validate()?;
        params.validate()?;
        let f = DerivativeFilter::new(filter_cutoff_hz, FILTER_DAMPING, dt)?;
        Ok(Self {
            gains,
            params,
            angle_guard: DEFAULT_ANGLE_GUARD,
            disturbance_estimate: (Vector3::zeros(), Vector3::zeros()),
            filters: [f.clone(), f.clone(), f],
        })
    }

    pub fn reset(&mut self) {
        self.filters.iter_mut().for_each(DerivativeFilter::reset);
    }

    pub fn compute(&mut self, state: &SystemState, target: &PositionReference) -> Result<ControlOutput> {
        let gains = &self.gains;
        let actual = Vector6::new(
            state.position.x,
            state.position.y,
            state.position.z,
            state.attitude.phi,
            state.attitude.theta,
            state.attitude.psi,
        );
        let actual_rate = Vector6::new(
            state.velocity.x,
            state.velocity.y,
            state.velocity.z,
            state.body_rates.x,
            state.body_rates.y,
            state.body_rates.z,
        );

        let mut reference = ReferenceSignal::default();
        reference.position.fixed_rows_mut::<3>(0).copy_from(&target.position);
        reference.velocity.fixed_rows_mut::<3>(0).copy_from(&target.velocity);
        reference.acceleration.fixed_rows_mut::<3>(0).copy_from(&target.acceleration);

        // position loop only needs the translational axes of e and S
        let err = TrackingError::new(&reference, &actual, &actual_rate);
        let sliding = sliding_surface(&err, gains);
        let u = position_virtual_controls(
            state,
            &err,
            &sliding,
            &target.acceleration,
            gains,
            &self.params,
            &self.disturbance_estimate.0,
        );
        let thrust = thrust_command(u.z, &state.attitude, self.angle_guard)?;
        let (phi_d, theta_d) = desired_attitude(&u, gains.yaw_setpoint)?;

        let desired = [phi_d, theta_d, gains.yaw_setpoint];
        let mut att_accel = Vector3::zeros();
        for i in 0..3 {
            let (_, rate, accel) = self.filters[i].update(desired[i]);
            reference.position[i + 3] = desired[i];
            reference.velocity[i + 3] = rate;
            reference.acceleration[i + 3] = accel;
            att_accel[i] = accel;
        }

        let err = TrackingError::new(&reference, &actual, &actual_rate);
        let sliding = sliding_surface(&err, gains);
        let moments = attitude_moments(
            state,
            &err,
            &sliding,
            &att_accel,
            gains,
            &self.params,
            &self.disturbance_estimate.1,
        );

        Ok(ControlOutput {
            thrust: thrust.thrust,
            moments,
            virtual_controls: u,
            reference,
            error: err,
            sliding,
            thrust_negative: thrust.negative,
        })
    }
}
