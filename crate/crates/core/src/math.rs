//! Scalar-first quaternion/attitude algebra and the small fixed-size helpers
//! used by the dynamics, constraint, and discretization layers.

use nalgebra::{Matrix3, Matrix4, SMatrix, Vector3, Vector4};
use serde::{Deserialize, Serialize};

/// Direction cosine matrix mapping inertial coordinates into body coordinates.
pub type Dcm = Matrix3<f64>;

/// Unit quaternion in scalar-first ordering `(q0, q1, q2, q3)`.
///
/// Parameterizes the inertial-to-body transformation; `to_dcm` returns the
/// matching DCM. Constructors normalize, so the unit-norm invariant holds to
/// better than 1e-9 everywhere downstream.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quat([f64; 4]);

impl Quat {
    pub fn identity() -> Self {
        Quat([1.0, 0.0, 0.0, 0.0])
    }

    /// Keeps components as-is (possibly non-unit). The dynamics Jacobians
    /// differentiate the raw polynomial DCM formula, so they must evaluate it
    /// at unnormalized points too.
    pub(crate) fn raw(q: [f64; 4]) -> Self {
        Quat(q)
    }

    /// Builds from scalar-first components, normalizing.
    pub fn new(q0: f64, q1: f64, q2: f64, q3: f64) -> Self {
        Quat([q0, q1, q2, q3]).normalized()
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Quat([v[0], v[1], v[2], v[3]]).normalized()
    }

    /// Rotation by `angle` (rad) about `axis`.
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let a = axis.normalize() * (0.5 * angle).sin();
        Quat([(0.5 * angle).cos(), a.x, a.y, a.z]).normalized()
    }

    /// Minimal rotation carrying unit vector `from` onto unit vector `to`.
    pub fn rotation_between(from: &Vector3<f64>, to: &Vector3<f64>) -> Self {
        let f = from.normalize();
        let t = to.normalize();
        let c = f.dot(&t);
        if c < -1.0 + 1e-12 {
            // Antipodal: pick any axis orthogonal to `from`.
            let ortho = if f.x.abs() < 0.9 {
                Vector3::x()
            } else {
                Vector3::y()
            };
            let axis = f.cross(&ortho).normalize();
            return Quat::from_axis_angle(&axis, std::f64::consts::PI);
        }
        let axis = f.cross(&t);
        // Half-angle construction: q = (1 + c, axis) up to normalization.
        Quat([1.0 + c, axis.x, axis.y, axis.z]).normalized()
    }

    pub fn scalar(&self) -> f64 {
        self.0[0]
    }

    pub fn vector_part(&self) -> Vector3<f64> {
        Vector3::new(self.0[1], self.0[2], self.0[3])
    }

    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.0[0], self.0[1], self.0[2], self.0[3])
    }

    pub fn norm(&self) -> f64 {
        self.as_vector().norm()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Quat([self.0[0] / n, self.0[1] / n, self.0[2] / n, self.0[3] / n])
    }

    pub fn conjugate(&self) -> Self {
        Quat([self.0[0], -self.0[1], -self.0[2], -self.0[3]])
    }

    pub fn to_dcm(&self) -> Dcm {
        quat_to_dcm(self)
    }

    /// Rotation angle (rad) separating two attitudes, sign-ambiguity resolved
    /// by the absolute value of the relative quaternion's scalar part.
    pub fn angle_to(&self, other: &Quat) -> f64 {
        let rel = quat_multiply(&self.conjugate(), other);
        2.0 * rel.scalar().abs().min(1.0).acos()
    }
}

/// Hamilton product `a ⊗ b`, renormalized.
pub fn quat_multiply(a: &Quat, b: &Quat) -> Quat {
    let (as_, av) = (a.scalar(), a.vector_part());
    let (bs, bv) = (b.scalar(), b.vector_part());
    let s = as_ * bs - av.dot(&bv);
    let v = bv * as_ + av * bs + av.cross(&bv);
    Quat([s, v.x, v.y, v.z]).normalized()
}

/// DCM of a scalar-first unit quaternion (inertial-to-body for an attitude
/// quaternion). Satisfies `quat_to_dcm(a ⊗ b) = quat_to_dcm(b) * quat_to_dcm(a)`.
pub fn quat_to_dcm(q: &Quat) -> Dcm {
    let [q0, q1, q2, q3] = q.0;
    Matrix3::new(
        1.0 - 2.0 * (q2 * q2 + q3 * q3),
        2.0 * (q1 * q2 + q0 * q3),
        2.0 * (q1 * q3 - q0 * q2),
        2.0 * (q1 * q2 - q0 * q3),
        1.0 - 2.0 * (q1 * q1 + q3 * q3),
        2.0 * (q2 * q3 + q0 * q1),
        2.0 * (q1 * q3 + q0 * q2),
        2.0 * (q2 * q3 - q0 * q1),
        1.0 - 2.0 * (q1 * q1 + q2 * q2),
    )
}

/// Quaternion from a DCM (Shepperd's max-pivot variant), scalar part >= 0.
pub fn dcm_to_quat(c: &Dcm) -> Quat {
    let tr = c[(0, 0)] + c[(1, 1)] + c[(2, 2)];
    let (q0, q1, q2, q3);
    if tr >= c[(0, 0)].max(c[(1, 1)]).max(c[(2, 2)]) {
        q0 = 0.5 * (1.0 + tr).sqrt();
        let k = 0.25 / q0;
        q1 = k * (c[(1, 2)] - c[(2, 1)]);
        q2 = k * (c[(2, 0)] - c[(0, 2)]);
        q3 = k * (c[(0, 1)] - c[(1, 0)]);
    } else if c[(0, 0)] >= c[(1, 1)].max(c[(2, 2)]) {
        q1 = 0.5 * (1.0 + 2.0 * c[(0, 0)] - tr).sqrt();
        let k = 0.25 / q1;
        q0 = k * (c[(1, 2)] - c[(2, 1)]);
        q2 = k * (c[(0, 1)] + c[(1, 0)]);
        q3 = k * (c[(2, 0)] + c[(0, 2)]);
    } else if c[(1, 1)] >= c[(2, 2)] {
        q2 = 0.5 * (1.0 + 2.0 * c[(1, 1)] - tr).sqrt();
        let k = 0.25 / q2;
        q0 = k * (c[(2, 0)] - c[(0, 2)]);
        q1 = k * (c[(0, 1)] + c[(1, 0)]);
        q3 = k * (c[(1, 2)] + c[(2, 1)]);
    } else {
        q3 = 0.5 * (1.0 + 2.0 * c[(2, 2)] - tr).sqrt();
        let k = 0.25 / q3;
        q0 = k * (c[(0, 1)] - c[(1, 0)]);
        q1 = k * (c[(2, 0)] + c[(0, 2)]);
        q2 = k * (c[(1, 2)] + c[(2, 1)]);
    }
    let q = Quat([q0, q1, q2, q3]).normalized();
    if q.scalar() < 0.0 {
        Quat([-q.0[0], -q.0[1], -q.0[2], -q.0[3]])
    } else {
        q
    }
}

/// Skew-symmetric 4x4 matrix such that `q' = 0.5 * omega_matrix(w) * q`
/// reproduces rigid-body quaternion kinematics (w in body coordinates).
pub fn omega_matrix(w: &Vector3<f64>) -> Matrix4<f64> {
    Matrix4::new(
        0.0, -w.x, -w.y, -w.z, //
        w.x, 0.0, w.z, -w.y, //
        w.y, -w.z, 0.0, w.x, //
        w.z, w.y, -w.x, 0.0,
    )
}

/// Spherical linear interpolation between unit quaternions; output carries a
/// nonnegative scalar part.
pub fn slerp(a: &Quat, b: &Quat, t: f64) -> Quat {
    let va = a.as_vector();
    let mut vb = b.as_vector();
    let mut dot = va.dot(&vb);
    if dot < 0.0 {
        vb = -vb;
        dot = -dot;
    }
    let out = if dot > 1.0 - 1e-12 {
        // Nearly identical attitudes: linear blend then renormalize.
        va + (vb - va) * t
    } else {
        let theta = dot.min(1.0).acos();
        let st = theta.sin();
        va * ((1.0 - t) * theta).sin() / st + vb * (t * theta).sin() / st
    };
    let q = Quat::from_vector(&out);
    if q.scalar() < 0.0 {
        Quat([-q.0[0], -q.0[1], -q.0[2], -q.0[3]])
    } else {
        q
    }
}

/// Cross-product matrix: `skew(a) * b = a x b`.
pub fn skew(a: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0)
}

/// Jacobian of `quat_to_dcm(q) * v` with respect to the four quaternion
/// components, treating them as free (no unit-norm projection).
pub fn dcm_times_vec_jacobian_q(q: &Quat, v: &Vector3<f64>) -> SMatrix<f64, 3, 4> {
    let q0 = q.scalar();
    let qv = q.vector_part();
    // C(q) v = v - 2 q0 (qv x v) + 2 qv x (qv x v)
    let d_q0 = -2.0 * qv.cross(v);
    let d_qv = 2.0 * (qv * v.transpose() + Matrix3::identity() * qv.dot(v)
        - 2.0 * v * qv.transpose()
        + q0 * skew(v));
    let mut out = SMatrix::<f64, 3, 4>::zeros();
    out.set_column(0, &d_q0);
    out.fixed_view_mut::<3, 3>(0, 1).copy_from(&d_qv);
    out
}
