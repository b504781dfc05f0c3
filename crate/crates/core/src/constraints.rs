//! Path constraints: convex state/control constraints evaluated as signed
//! residuals, the linearized thrust lower bound, and the continuous
//! state-triggered constraint machinery.

use nalgebra::{SVector, Vector2, Vector3};
use thiserror::Error;

use crate::dynamics::{StateVector, IDX_Q, IDX_R, IDX_V, IDX_W};
use crate::math::{dcm_times_vec_jacobian_q, quat_to_dcm, Quat};
use crate::scenario::{Scenario, StcKind, StcParams};

/// Dimension of z = [t_c, s, x, u].
pub const Z_DIM: usize = 19;
/// Offsets of the blocks inside z.
pub const Z_TC: usize = 0;
pub const Z_S: usize = 1;
pub const Z_X: usize = 2;
pub const Z_U: usize = 16;

pub type ZVector = SVector<f64, Z_DIM>;

#[derive(Debug, Error)]
pub enum ConstraintError {
    #[error("thrust lower bound cannot be linearized about zero reference thrust")]
    ZeroReferenceThrust,
}

/// One linearized scalar constraint `h0 + grad_z . dz <= 0` over z.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearizedRow {
    pub h0: f64,
    pub grad_z: ZVector,
}

impl LinearizedRow {
    pub fn zero() -> Self {
        LinearizedRow {
            h0: 0.0,
            grad_z: ZVector::zeros(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.h0 == 0.0 && self.grad_z == ZVector::zeros()
    }

    /// Value of the linearized constraint at deviation `dz`.
    pub fn value(&self, dz: &ZVector) -> f64 {
        self.h0 + self.grad_z.dot(dz)
    }
}

/// Trigger/constraint/product evaluation of a state-triggered constraint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StcEval {
    pub g: f64,
    pub f: f64,
    pub h: f64,
    /// Trigger strictly satisfied at the reference (g < 0).
    pub active: bool,
}

/// Product form of the continuous state-triggered constraint:
/// `h = -min(g, 0) * f`; as an inequality `h <= 0` this is logically
/// equivalent to `g >= 0 or f <= 0`.
pub fn stc_h(g: f64, f: f64) -> f64 {
    -g.min(0.0) * f
}

fn stc_vec_and_threshold(x: &StateVector, stc: &StcParams) -> Vector3<f64> {
    match stc.kind {
        StcKind::QAlpha => x.fixed_rows::<3>(IDX_V).into_owned(),
        StcKind::Fov => x.fixed_rows::<3>(IDX_R).into_owned(),
    }
}

/// Evaluates the velocity-triggered angle-of-attack constraint (or its
/// range-triggered field-of-view variant) at the given kinematic vector and
/// attitude. For `q_alpha` pass the inertial velocity; for `fov` pass the
/// inertial position.
pub fn aoa_stc_eval(vec: &Vector3<f64>, q: &Quat, stc: &StcParams) -> StcEval {
    let norm = vec.norm();
    let g = stc.trigger_threshold - norm;
    let cos_limit = stc.cone_limit_deg.to_radians().cos();
    let f = cos_limit * norm + (quat_to_dcm(q) * vec).x;
    StcEval {
        g,
        f,
        h: stc_h(g, f),
        active: g < 0.0,
    }
}

/// Evaluates the scenario's state-triggered constraint on a packed state.
pub fn stc_eval_state(x: &StateVector, stc: &StcParams) -> StcEval {
    let vec = stc_vec_and_threshold(x, stc);
    let q = Quat::raw([x[IDX_Q], x[IDX_Q + 1], x[IDX_Q + 2], x[IDX_Q + 3]]);
    aoa_stc_eval(&vec, &q, stc)
}

/// Linearized row of the state-triggered constraint about `z_ref`.
///
/// On the triggered branch (g < 0) this is the first-order expansion of
/// `h = -g * f`. When the trigger is off at the reference -- including
/// exactly zero -- the constraint is disabled for this iteration and the
/// zero row is returned.
pub fn aoa_stc_row(z_ref: &ZVector, stc: &StcParams) -> LinearizedRow {
    let x = z_ref.fixed_rows::<14>(Z_X).into_owned();
    let eval = stc_eval_state(&x, stc);
    if !eval.active {
        return LinearizedRow::zero();
    }

    let vec = stc_vec_and_threshold(&x, stc);
    let q = Quat::raw([x[IDX_Q], x[IDX_Q + 1], x[IDX_Q + 2], x[IDX_Q + 3]]);
    let norm = vec.norm();
    let cos_limit = stc.cone_limit_deg.to_radians().cos();

    // Gradients of g and f with respect to the kinematic vector and q.
    let dg_dvec = -vec.transpose() / norm;
    let c_bi = quat_to_dcm(&q);
    let df_dvec = cos_limit * vec.transpose() / norm + c_bi.row(0);
    let df_dq = dcm_times_vec_jacobian_q(&q, &vec).row(0).into_owned();

    let vec_offset = match stc.kind {
        StcKind::QAlpha => Z_X + IDX_V,
        StcKind::Fov => Z_X + IDX_R,
    };

    let mut grad = ZVector::zeros();
    for i in 0..3 {
        grad[vec_offset + i] = -(eval.f * dg_dvec[i] + eval.g * df_dvec[i]);
    }
    for i in 0..4 {
        grad[Z_X + IDX_Q + i] = -eval.g * df_dq[i];
    }
    LinearizedRow { h0: eval.h, grad_z: grad }
}

/// Supporting-hyperplane linearization of the thrust magnitude lower bound
/// `t_min <= |u|` about the reference control.
pub fn thrust_lb_row(u_ref: &Vector3<f64>, t_min: f64) -> Result<LinearizedRow, ConstraintError> {
    let norm = u_ref.norm();
    if norm == 0.0 {
        return Err(ConstraintError::ZeroReferenceThrust);
    }
    let mut grad = ZVector::zeros();
    for i in 0..3 {
        grad[Z_U + i] = -u_ref[i] / norm;
    }
    Ok(LinearizedRow {
        h0: t_min - norm,
        grad_z: grad,
    })
}

/// Signed residuals (<= 0 means satisfied) of the convex node constraints.
#[derive(Clone, Copy, Debug)]
pub struct ConvexResiduals {
    /// m_dry - m.
    pub mass_floor: f64,
    /// |H_gam r| - tan(gamma_gs) e1.r  (cone half-angle from vertical).
    pub glide_slope: f64,
    /// cos(theta_max) - cos(tilt).
    pub tilt: f64,
    /// |w| - omega_max.
    pub rate: f64,
    /// |u| - T_max.
    pub thrust_ub: f64,
    /// cos(delta_max) |u| - e1.u.
    pub gimbal: f64,
}

impl ConvexResiduals {
    pub fn as_named(&self) -> [(&'static str, f64); 6] {
        [
            ("mass_floor", self.mass_floor),
            ("glide_slope", self.glide_slope),
            ("tilt", self.tilt),
            ("rate", self.rate),
            ("thrust_ub", self.thrust_ub),
            ("gimbal", self.gimbal),
        ]
    }

    pub fn max_violation(&self) -> f64 {
        self.as_named()
            .iter()
            .map(|(_, v)| *v)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Evaluates all convex node constraints at a packed state and control.
pub fn convex_node_constraints(
    x: &StateVector,
    u: &Vector3<f64>,
    scenario: &Scenario,
) -> ConvexResiduals {
    let veh = &scenario.vehicle;
    let bnd = &scenario.boundary;
    let r = x.fixed_rows::<3>(IDX_R).into_owned();
    let w = x.fixed_rows::<3>(IDX_W).into_owned();
    let q = Quat::new(x[IDX_Q], x[IDX_Q + 1], x[IDX_Q + 2], x[IDX_Q + 3]);

    let horiz = Vector2::new(r.y, r.z).norm();
    let glide_slope = horiz - bnd.gamma_gs_deg.to_radians().tan() * r.x;

    let qv = q.as_vector();
    let cos_tilt = 1.0 - 2.0 * (qv[2] * qv[2] + qv[3] * qv[3]);
    let tilt = veh.theta_max_deg.to_radians().cos() - cos_tilt;

    ConvexResiduals {
        mass_floor: veh.m_dry - x[0],
        glide_slope,
        tilt,
        rate: w.norm() - veh.omega_max_deg.to_radians(),
        thrust_ub: u.norm() - veh.t_max,
        gimbal: veh.delta_max_deg.to_radians().cos() * u.norm() - u.x,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::default_scenario;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn qalpha() -> StcParams {
        StcParams {
            enabled: true,
            kind: StcKind::QAlpha,
            trigger_threshold: 2.0,
            cone_limit_deg: 3.0,
        }
    }

    #[test]
    fn stc_h_examples() {
        assert_eq!(stc_h(0.5, 7.0), 0.0);
        assert_eq!(stc_h(-1.0, 2.0), 2.0);
        assert_eq!(stc_h(-0.5, -3.0), -1.5);
    }

    #[test]
    fn stc_h_logical_equivalence() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..100_000 {
            let g: f64 = rng.gen_range(-2.0..2.0);
            let f: f64 = rng.gen_range(-2.0..2.0);
            let lhs = stc_h(g, f) <= 0.0;
            let rhs = g >= 0.0 || f <= 0.0;
            assert_eq!(lhs, rhs, "g={g} f={f}");
        }
    }

    #[test]
    fn aoa_eval_below_trigger_is_slack() {
        let stc = qalpha();
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..20 {
            let q = Quat::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let e = aoa_stc_eval(&Vector3::new(0.0, -1.0, 0.0), &q, &stc);
            assert!(e.g > 0.0);
            assert_eq!(e.h, 0.0);
            assert!(!e.active);
        }
    }

    #[test]
    fn aoa_eval_straight_descent() {
        let stc = qalpha();
        let e = aoa_stc_eval(&Vector3::new(-3.0, 0.0, 0.0), &Quat::identity(), &stc);
        assert_relative_eq!(e.g, -1.0, epsilon = 1e-12);
        let expect = 3.0 * (3.0_f64.to_radians().cos() - 1.0);
        assert_relative_eq!(e.f, expect, epsilon = 1e-9);
        assert_relative_eq!(e.h, expect, epsilon = 1e-9);
        assert!(e.h <= 0.0);
    }

    #[test]
    fn aoa_eval_violation_at_ten_degrees() {
        let stc = qalpha();
        let a = 10.0_f64.to_radians();
        let v = Vector3::new(-3.0 * a.cos(), -3.0 * a.sin(), 0.0);
        let e = aoa_stc_eval(&v, &Quat::identity(), &stc);
        let expect = 3.0 * (3.0_f64.to_radians().cos() - a.cos());
        assert_relative_eq!(e.f, expect, epsilon = 1e-9);
        assert!(e.h > 0.0);
    }

    fn z_from(v: Vector3<f64>, q: Quat) -> ZVector {
        let mut z = ZVector::zeros();
        z[Z_S] = 3.0;
        z[Z_X] = 1.5; // mass
        for i in 0..3 {
            z[Z_X + IDX_V + i] = v[i];
            z[Z_X + IDX_R + i] = 2.0 + i as f64;
        }
        let qv = q.as_vector();
        for i in 0..4 {
            z[Z_X + IDX_Q + i] = qv[i];
        }
        z
    }

    #[test]
    fn row_disabled_when_trigger_off_or_boundary() {
        let stc = qalpha();
        let slow = z_from(Vector3::new(0.0, -1.0, 0.0), Quat::identity());
        assert!(aoa_stc_row(&slow, &stc).is_zero());

        // g = 0 exactly: same disabled branch.
        let boundary = z_from(Vector3::new(0.0, -2.0, 0.0), Quat::identity());
        assert!(aoa_stc_row(&boundary, &stc).is_zero());
    }

    #[test]
    fn row_gradient_matches_finite_differences() {
        let stc = qalpha();
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let mut checked = 0;
        while checked < 30 {
            let v = Vector3::new(
                rng.gen_range(-4.0..-2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            );
            let q = Quat::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let z = z_from(v, q);
            let x = z.fixed_rows::<14>(Z_X).into_owned();
            if !stc_eval_state(&x, &stc).active {
                continue;
            }
            checked += 1;
            let row = aoa_stc_row(&z, &stc);
            assert_relative_eq!(row.value(&ZVector::zeros()), stc_eval_state(&x, &stc).h);
            let h = 1e-6;
            for i in 0..Z_DIM {
                let mut zp = z;
                let mut zm = z;
                zp[i] += h;
                zm[i] -= h;
                let hp = stc_eval_state(&zp.fixed_rows::<14>(Z_X).into_owned(), &stc).h;
                let hm = stc_eval_state(&zm.fixed_rows::<14>(Z_X).into_owned(), &stc).h;
                let fd = (hp - hm) / (2.0 * h);
                let denom = fd.abs().max(1.0);
                assert!(
                    (row.grad_z[i] - fd).abs() / denom <= 1e-5,
                    "component {i}: analytic {} vs fd {}",
                    row.grad_z[i],
                    fd
                );
            }
        }
    }

    #[test]
    fn thrust_lb_examples() {
        let row = thrust_lb_row(&Vector3::new(2.0, 0.0, 0.0), 1.5).unwrap();
        assert_relative_eq!(row.h0, -0.5, epsilon = 1e-12);
        // Gradient is -e1 in the control block, zero elsewhere.
        let mut expect = ZVector::zeros();
        expect[Z_U] = -1.0;
        assert_relative_eq!(row.grad_z, expect, epsilon = 1e-12);
        // Any u with u_x >= T_min satisfies the row: value = 1.5 - u_x.
        let mut dz = ZVector::zeros();
        dz[Z_U] = 1.7 - 2.0;
        assert_relative_eq!(row.value(&dz), 1.5 - 1.7, epsilon = 1e-12);

        assert!(thrust_lb_row(&Vector3::zeros(), 1.5).is_err());
    }

    #[test]
    fn thrust_lb_reference_feasibility() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for _ in 0..50 {
            let u = Vector3::new(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
            );
            if u.norm() < 1e-6 {
                continue;
            }
            let row = thrust_lb_row(&u, 1.5).unwrap();
            // dz = 0 satisfies the row iff |u_ref| >= T_min.
            assert_eq!(row.value(&ZVector::zeros()) <= 0.0, u.norm() >= 1.5);
        }
    }

    #[test]
    fn node_constraints_landed_state() {
        let scn = default_scenario();
        let mut x = StateVector::zeros();
        x[0] = 1.0;
        x[IDX_Q] = 1.0;
        let u = Vector3::new(scn.vehicle.t_min, 0.0, 0.0);
        let res = convex_node_constraints(&x, &u, &scn);
        assert!(res.max_violation() <= 0.0, "{res:?}");
        assert_eq!(res.glide_slope, 0.0);
    }

    #[test]
    fn glide_slope_cone_membership() {
        let scn = default_scenario();
        let mut x = StateVector::zeros();
        x[0] = 1.5;
        x[IDX_Q] = 1.0;
        let u = Vector3::new(2.0, 0.0, 0.0);
        // 71.6 degrees off vertical: inside the 75-degree cone.
        x[IDX_R] = 1.0;
        x[IDX_R + 1] = 3.0;
        assert!(convex_node_constraints(&x, &u, &scn).glide_slope <= 0.0);
        // 76 degrees off vertical: outside.
        x[IDX_R + 1] = 4.0;
        assert!(convex_node_constraints(&x, &u, &scn).glide_slope > 0.0);
    }

    #[test]
    fn tilt_residual_equals_cos_difference() {
        let scn = default_scenario();
        let u = Vector3::new(2.0, 0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        for _ in 0..40 {
            let theta = rng.gen_range(0.0..std::f64::consts::PI / 2.0);
            let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            // Tilt axis anywhere in the body e2-e3 plane.
            let axis = Vector3::new(0.0, phi.cos(), phi.sin());
            let q = Quat::from_axis_angle(&axis, theta);
            let mut x = StateVector::zeros();
            x[0] = 1.5;
            let qv = q.as_vector();
            for i in 0..4 {
                x[IDX_Q + i] = qv[i];
            }
            let res = convex_node_constraints(&x, &u, &scn);
            let expect = scn.vehicle.theta_max_deg.to_radians().cos() - theta.cos();
            assert_relative_eq!(res.tilt, expect, epsilon = 1e-9);
        }
    }

    #[test]
    fn tilt_forty_five_under_ninety_is_satisfied() {
        let scn = default_scenario();
        let q = Quat::from_axis_angle(&Vector3::y(), 45.0_f64.to_radians());
        let mut x = StateVector::zeros();
        x[0] = 1.5;
        let qv = q.as_vector();
        for i in 0..4 {
            x[IDX_Q + i] = qv[i];
        }
        let res = convex_node_constraints(&x, &Vector3::new(2.0, 0.0, 0.0), &scn);
        assert!(res.tilt < 0.0);
    }

    #[test]
    fn gimbal_vertical_thrust_always_ok() {
        let mut scn = default_scenario();
        let mut x = StateVector::zeros();
        x[0] = 1.5;
        x[IDX_Q] = 1.0;
        for delta in [0.0, 5.0, 45.0, 90.0] {
            scn.vehicle.delta_max_deg = delta;
            let res = convex_node_constraints(&x, &Vector3::new(3.0, 0.0, 0.0), &scn);
            assert!(res.gimbal <= 1e-12, "delta_max={delta}: {}", res.gimbal);
        }
    }
}
