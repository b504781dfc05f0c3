//! Exact nonlinear 6-DoF equations of motion with aerodynamic forces and
//! torques, plus their analytic Jacobians.
//!
//! The 14-dimensional state is packed as `[m, r(3), v(3), q(4), w(3)]` with a
//! scalar-first attitude quaternion. Jacobians treat all 14 components as
//! free; the unit-norm constraint is restored by the integrators, not here.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use thiserror::Error;

use crate::math::{dcm_times_vec_jacobian_q, omega_matrix, quat_to_dcm, skew, Quat};
use crate::scenario::{AeroMode, EnvironmentParams, Scenario};

pub const STATE_DIM: usize = 14;
pub const CONTROL_DIM: usize = 3;

pub type StateVector = SVector<f64, STATE_DIM>;
pub type StateJacobian = SMatrix<f64, STATE_DIM, STATE_DIM>;
pub type ControlJacobian = SMatrix<f64, STATE_DIM, CONTROL_DIM>;

// Offsets of the state blocks inside the packed vector.
pub const IDX_M: usize = 0;
pub const IDX_R: usize = 1;
pub const IDX_V: usize = 4;
pub const IDX_Q: usize = 7;
pub const IDX_W: usize = 11;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("nonpositive mass {0} is outside the model domain")]
    NonpositiveMass(f64),
    #[error("zero thrust is outside the feasible set (T_min > 0)")]
    ZeroThrust,
}

/// Vehicle state on the burn phase.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct State {
    pub m: f64,
    pub r_i: Vector3<f64>,
    pub v_i: Vector3<f64>,
    pub q_bi: Quat,
    pub w_b: Vector3<f64>,
}

impl State {
    pub fn to_vector(&self) -> StateVector {
        let mut x = StateVector::zeros();
        x[IDX_M] = self.m;
        x.fixed_rows_mut::<3>(IDX_R).copy_from(&self.r_i);
        x.fixed_rows_mut::<3>(IDX_V).copy_from(&self.v_i);
        x.fixed_rows_mut::<4>(IDX_Q)
            .copy_from(&self.q_bi.as_vector());
        x.fixed_rows_mut::<3>(IDX_W).copy_from(&self.w_b);
        x
    }

    /// Unpacks a raw 14-vector, renormalizing the attitude quaternion.
    pub fn from_vector(x: &StateVector) -> Self {
        State {
            m: x[IDX_M],
            r_i: x.fixed_rows::<3>(IDX_R).into_owned(),
            v_i: x.fixed_rows::<3>(IDX_V).into_owned(),
            q_bi: Quat::new(x[IDX_Q], x[IDX_Q + 1], x[IDX_Q + 2], x[IDX_Q + 3]),
            w_b: x.fixed_rows::<3>(IDX_W).into_owned(),
        }
    }
}

/// Commanded thrust in body coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Control {
    pub t_b: Vector3<f64>,
}

/// Aerodynamic force in body coordinates for inertial velocity `v_i` and
/// attitude `q`. Zero when the scenario disables aerodynamics or at rest.
pub fn aero_force_body(v_i: &Vector3<f64>, q: &Quat, env: &EnvironmentParams) -> Vector3<f64> {
    aero_force_body_raw(v_i, &quat_to_dcm(q), env)
}

fn aero_force_body_raw(
    v_i: &Vector3<f64>,
    c_bi: &Matrix3<f64>,
    env: &EnvironmentParams,
) -> Vector3<f64> {
    if env.aero_mode == AeroMode::None {
        return Vector3::zeros();
    }
    let speed = v_i.norm();
    if speed == 0.0 {
        return Vector3::zeros();
    }
    -0.5 * env.rho * speed * env.s_a * env.aero_coefficients() * (c_bi * v_i)
}

/// State derivative of the exact nonlinear model.
pub fn eom(x: &State, u: &Control, scenario: &Scenario) -> Result<StateVector, DynamicsError> {
    eom_raw(&x.to_vector(), &u.t_b, scenario)
}

/// Same as [`eom`] on a packed state vector, without renormalizing the
/// quaternion; this is the function the Jacobians differentiate.
pub fn eom_raw(
    x: &StateVector,
    u: &Vector3<f64>,
    scenario: &Scenario,
) -> Result<StateVector, DynamicsError> {
    let m = x[IDX_M];
    if m <= 0.0 {
        return Err(DynamicsError::NonpositiveMass(m));
    }
    let v = x.fixed_rows::<3>(IDX_V).into_owned();
    let q = Quat::raw([x[IDX_Q], x[IDX_Q + 1], x[IDX_Q + 2], x[IDX_Q + 3]]);
    let w = x.fixed_rows::<3>(IDX_W).into_owned();

    let veh = &scenario.vehicle;
    let env = &scenario.environment;
    let c_bi = quat_to_dcm(&q);
    let a_b = aero_force_body_raw(&v, &c_bi, env);

    let alpha = veh.alpha_mdot();
    let beta = alpha * env.p_amb * veh.a_noz;

    let mut dx = StateVector::zeros();
    dx[IDX_M] = -alpha * u.norm() - beta;
    dx.fixed_rows_mut::<3>(IDX_R).copy_from(&v);
    let f_i = c_bi.transpose() * (u + a_b);
    dx.fixed_rows_mut::<3>(IDX_V)
        .copy_from(&(f_i / m + env.gravity()));
    let qdot = 0.5 * omega_matrix(&w) * SVector::<f64, 4>::from(q.as_vector());
    dx.fixed_rows_mut::<4>(IDX_Q).copy_from(&qdot);
    let torque = veh.r_t().cross(u) + veh.r_cp().cross(&a_b) - w.cross(&(veh.inertia() * w));
    dx.fixed_rows_mut::<3>(IDX_W)
        .copy_from(&(veh.inertia().try_inverse().expect("SPD inertia") * torque));
    Ok(dx)
}

/// Analytic Jacobians of [`eom_raw`] with respect to state and control.
pub fn eom_jacobians(
    x: &StateVector,
    u: &Vector3<f64>,
    scenario: &Scenario,
) -> Result<(StateJacobian, ControlJacobian), DynamicsError> {
    let m = x[IDX_M];
    if m <= 0.0 {
        return Err(DynamicsError::NonpositiveMass(m));
    }
    let thrust_norm = u.norm();
    if thrust_norm == 0.0 {
        return Err(DynamicsError::ZeroThrust);
    }
    let v = x.fixed_rows::<3>(IDX_V).into_owned();
    let q = Quat::raw([x[IDX_Q], x[IDX_Q + 1], x[IDX_Q + 2], x[IDX_Q + 3]]);
    let w = x.fixed_rows::<3>(IDX_W).into_owned();

    let veh = &scenario.vehicle;
    let env = &scenario.environment;
    let c_bi = quat_to_dcm(&q);
    let a_b = aero_force_body_raw(&v, &c_bi, env);
    let j = veh.inertia();
    let j_inv = j.try_inverse().expect("SPD inertia");
    let alpha = veh.alpha_mdot();

    // Aerodynamic partials in body coordinates.
    let (da_dv, da_dq) = if env.aero_mode == AeroMode::None || v.norm() == 0.0 {
        (Matrix3::zeros(), SMatrix::<f64, 3, 4>::zeros())
    } else {
        let speed = v.norm();
        let scale = -0.5 * env.rho * env.s_a;
        let ca = env.aero_coefficients();
        let da_dv = scale * ca * (speed * c_bi + (c_bi * v) * (v.transpose() / speed));
        let da_dq = scale * speed * ca * dcm_times_vec_jacobian_q(&q, &v);
        (da_dv, da_dq)
    };

    let mut fx = StateJacobian::zeros();
    let mut fu = ControlJacobian::zeros();

    // Mass row.
    fu.fixed_view_mut::<1, 3>(IDX_M, 0)
        .copy_from(&(-alpha * u.transpose() / thrust_norm));

    // Position rows.
    fx.fixed_view_mut::<3, 3>(IDX_R, IDX_V)
        .copy_from(&Matrix3::identity());

    // Velocity rows: d/dt v = C_{I<-B}(q) (u + A_B(v, q)) / m + g.
    let net_body = u + a_b;
    let f_i = c_bi.transpose() * net_body;
    fx.fixed_view_mut::<3, 1>(IDX_V, IDX_M)
        .copy_from(&(-f_i / (m * m)));
    fx.fixed_view_mut::<3, 3>(IDX_V, IDX_V)
        .copy_from(&(c_bi.transpose() * da_dv / m));
    // C_{I<-B}(q) w = C_{B<-I}(conj q)^T ... differentiate via the conjugate.
    let d_cib_w = {
        let qc = q.conjugate();
        let jac = dcm_times_vec_jacobian_q(&qc, &net_body);
        // Chain rule through conj: d(conj q)/dq = diag(1, -1, -1, -1).
        let mut out = jac;
        for col in 1..4 {
            out.set_column(col, &(-jac.column(col)));
        }
        out
    };
    fx.fixed_view_mut::<3, 4>(IDX_V, IDX_Q)
        .copy_from(&((d_cib_w + c_bi.transpose() * da_dq) / m));
    fu.fixed_view_mut::<3, 3>(IDX_V, 0)
        .copy_from(&(c_bi.transpose() / m));

    // Quaternion rows: q' = 0.5 Omega(w) q.
    fx.fixed_view_mut::<4, 4>(IDX_Q, IDX_Q)
        .copy_from(&(0.5 * omega_matrix(&w)));
    let qv = q.vector_part();
    let mut xi = SMatrix::<f64, 4, 3>::zeros();
    xi.fixed_view_mut::<1, 3>(0, 0).copy_from(&(-qv.transpose()));
    xi.fixed_view_mut::<3, 3>(1, 0)
        .copy_from(&(q.scalar() * Matrix3::identity() + skew(&qv)));
    fx.fixed_view_mut::<4, 3>(IDX_Q, IDX_W).copy_from(&(0.5 * xi));

    // Angular-rate rows.
    fx.fixed_view_mut::<3, 3>(IDX_W, IDX_V)
        .copy_from(&(j_inv * skew(&veh.r_cp()) * da_dv));
    fx.fixed_view_mut::<3, 4>(IDX_W, IDX_Q)
        .copy_from(&(j_inv * skew(&veh.r_cp()) * da_dq));
    fx.fixed_view_mut::<3, 3>(IDX_W, IDX_W)
        .copy_from(&(j_inv * (skew(&(j * w)) - skew(&w) * j)));
    fu.fixed_view_mut::<3, 3>(IDX_W, 0)
        .copy_from(&(j_inv * skew(&veh.r_t())));

    Ok((fx, fu))
}
