use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector, Vector3, Vector4};
use proptest::prelude::*;

use tandemlift::allocation::{mixer_matrix, quad_mixer_inverse, rotor_speeds, AllocationGeometry, QuadInputs, WrenchCommand};
use tandemlift::admittance::gate_force;
use tandemlift::dynamics::QuadParams;

fn geometry(costs: &[f64; 8]) -> AllocationGeometry {
    AllocationGeometry::new(&Vector3::new(0.0, 1.0, 0.0), &Vector3::new(0.0, -1.0, 0.0), costs).unwrap()
}

/// Weighted minimum-norm solution through the SVD pseudo-inverse of `B H⁻¹`.
fn pseudo_inverse_oracle(g: &AllocationGeometry, w: &Vector4<f64>) -> DVector<f64> {
    let b = DMatrix::from_fn(4, 8, |i, j| g.b[(i, j)] / g.h[j]);
    let pinv = b.pseudo_inverse(1e-12).unwrap();
    let v = pinv * DVector::from_column_slice(w.as_slice());
    DVector::from_fn(8, |j, _| v[j] / g.h[j])
}

fn wrench() -> impl Strategy<Value = (f64, [f64; 3])> {
    (0.0..80.0f64, prop::array::uniform3(-10.0..10.0f64))
}

fn costs() -> impl Strategy<Value = [f64; 8]> {
    prop::array::uniform8(0.1..10.0f64)
}

proptest! {
    #[test]
    fn allocation_reproduces_wrench((t, m) in wrench(), c in costs()) {
        let g = geometry(&c);
        let m = Vector3::from(m);
        let u = g.allocate(t, &m);
        let back = g.wrench(&u);
        let w = Vector4::new(t, m.x, m.y, m.z);
        prop_assert!((back - w).amax() < 1e-9 * w.amax().max(1.0));
    }

    #[test]
    fn allocation_matches_pseudo_inverse((t, m) in wrench(), c in costs()) {
        let g = geometry(&c);
        let u = g.allocate(t, &Vector3::from(m));
        let oracle = pseudo_inverse_oracle(&g, &Vector4::new(t, m[0], m[1], m[2]));
        for j in 0..8 {
            prop_assert!((u[j] - oracle[j]).abs() < 1e-8 * oracle.amax().max(1.0), "entry {}: {} vs {}", j, u[j], oracle[j]);
        }
    }

    #[test]
    fn nullspace_moves_never_lower_cost(
        (t, m) in wrench(),
        c in costs(),
        z in prop::array::uniform8(-1.0..1.0f64),
    ) {
        let g = geometry(&c);
        let u = g.allocate(t, &Vector3::from(m));
        // project an arbitrary direction onto ker B with I - B⁺B
        let b = DMatrix::from_fn(4, 8, |i, j| g.b[(i, j)]);
        let projector = DMatrix::identity(8, 8) - b.clone().pseudo_inverse(1e-12).unwrap() * b;
        let d = projector * DVector::from_column_slice(&z);
        let delta = QuadInputs::from_column_slice(d.as_slice());
        prop_assert!((g.wrench(&delta)).amax() < 1e-10);
        let perturbed = u + delta;
        prop_assert!(g.cost(&perturbed) >= g.cost(&u) - 1e-9 * g.cost(&u).max(1.0));
    }

    #[test]
    fn mixer_inverse_round_trip(u in prop::array::uniform4(-20.0..20.0f64), l in 0.1..0.5f64, mu in 0.005..0.05f64) {
        let u = Vector4::from(u);
        let f = quad_mixer_inverse(&u, l, mu).unwrap();
        prop_assert!((mixer_matrix(l, mu) * f.raw - u).amax() < 1e-9 * u.amax().max(1.0));
        prop_assert_eq!(f.saturated, f.raw.iter().any(|x| *x < 0.0));
        prop_assert!(f.clamped.iter().all(|x| *x >= 0.0));
    }

    #[test]
    fn gate_is_idempotent(f in prop::array::uniform3(-2.0..2.0f64), threshold in 0.0..2.0f64) {
        let f = Vector3::from(f);
        let once = gate_force(&f, threshold);
        prop_assert_eq!(gate_force(&once, threshold), once);
        prop_assert!(once == f || once == Vector3::zeros());
    }

    #[test]
    fn rotor_speeds_square_back(f in prop::array::uniform4(0.0..20.0f64)) {
        let kt = QuadParams::reference().thrust_constant;
        let f = Vector4::from(f);
        let w = rotor_speeds(&f, kt).unwrap();
        prop_assert!((w.map(|x| kt * x * x) - f).amax() < 1e-9);
    }
}

#[test]
fn equal_costs_split_hover_thrust_evenly() {
    let g = geometry(&[1.0; 8]);
    let u = g.allocate(3.5 * 9.81, &Vector3::zeros());
    assert_relative_eq!(u[0], u[4], epsilon = 1e-12);
    assert_relative_eq!(u[0] + u[4], 3.5 * 9.81, epsilon = 1e-12);
}

#[test]
fn roll_moment_is_carried_by_differential_thrust() {
    // with the beam along y, a roll moment is cheapest as a thrust difference
    // (lever 1 m each) plus a share on the individual roll inputs
    let g = geometry(&[1.0; 8]);
    let u = g.allocate(34.0, &Vector3::new(2.0, 0.0, 0.0));
    assert!(u[0] > u[4]);
    assert_relative_eq!(u[0] - u[4], 2.0 * (u[0] - 17.0), epsilon = 1e-12);
    assert_relative_eq!(u[1], u[5], epsilon = 1e-12);
    assert_relative_eq!(u[0] - u[4] + u[1] + u[5], 2.0, epsilon = 1e-12);
}

#[test]
fn heavier_cost_shifts_effort_away() {
    let mut c = [1.0; 8];
    c[4] = 4.0;
    let g = geometry(&c);
    let u = g.allocate(34.0, &Vector3::zeros());
    // the uneven split is partly balanced by the individual roll inputs
    assert!(u[0] > 2.0 * u[4], "{} vs {}", u[0], u[4]);
    assert!(u[1] < 0.0 && u[5] < 0.0);
    assert!((g.wrench(&u) - Vector4::new(34.0, 0.0, 0.0, 0.0)).amax() < 1e-12);
}

#[test]
fn wrench_command_at_hover_has_no_clamping() {
    let q = QuadParams::reference();
    let g = geometry(&[1.0; 8]);
    let cmd = WrenchCommand::compute(&g, 3.5 * 9.81, &Vector3::zeros(), q.arm_length, q.thrust_constant, q.mu()).unwrap();
    assert!(!cmd.clamped);
    let per_rotor = 3.5 * 9.81 / 8.0;
    for f in cmd.rotor_thrusts.iter() {
        assert_relative_eq!(*f, per_rotor, epsilon = 1e-12);
    }
    let w = (per_rotor / q.thrust_constant).sqrt();
    assert!(cmd.rotor_speeds.iter().all(|s| (s - w).abs() < 1e-9));
}

#[test]
fn degenerate_mixer_rejected() {
    assert!(quad_mixer_inverse(&Vector4::zeros(), 0.0, 0.016).is_err());
    assert!(quad_mixer_inverse(&Vector4::zeros(), 0.2, 0.0).is_err());
}

#[test]
fn geometry_construction_checks_costs() {
    assert!(AllocationGeometry::new(&Vector3::zeros(), &Vector3::zeros(), &[1.0; 8]).is_ok());
    let mut c = [1.0; 8];
    c[2] = -1.0;
    assert!(AllocationGeometry::new(&Vector3::y(), &-Vector3::y(), &c).is_err());
}
