//! Quaternion and rotation algebra used by every other module.
//!
//! Conventions, held throughout the crate:
//! - Quaternions are **scalar-last**: `q = (x, y, z, w)` with vector part
//!   `(x, y, z)` and scalar part `w`.
//! - Products are Hamilton products, so `dcm(a ⊗ b) = dcm(a) · dcm(b)`.
//! - `dcm(q)` maps **body-frame** vectors into the **chief** (inertial-fixed)
//!   frame.
//!
//! Unit norm is re-established after every product and integration step;
//! strict entry points reject inputs whose norm error exceeds `UNIT_TOL`.

use nalgebra::{Matrix3, SMatrix, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
/// 4x3 matrix, used by [`sigma_matrix`].
pub type Mat4x3 = SMatrix<f64, 4, 3>;

/// Norm tolerance beyond which a quaternion input is rejected.
pub const UNIT_TOL: f64 = 1e-6;

/// Unit quaternion, scalar-last.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion { x: 0.0, y: 0.0, z: 0.0, w: 1.0 };

    pub fn new(x: f64, y: f64, z: f64, w: f64) -> Self {
        Self { x, y, z, w }
    }

    pub fn identity() -> Self {
        Self::IDENTITY
    }

    pub fn from_parts(vector: Vec3, scalar: f64) -> Self {
        Self { x: vector.x, y: vector.y, z: vector.z, w: scalar }
    }

    /// Rotation of `angle` radians about `axis` (normalized internally).
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 {
            return Self::IDENTITY;
        }
        let half = 0.5 * angle;
        Self::from_parts(axis * (half.sin() / n), half.cos())
    }

    /// Rotation whose axis-angle vector is `phi` (angle = ‖phi‖).
    pub fn from_rotation_vector(phi: &Vec3) -> Self {
        let angle = phi.norm();
        if angle < 1e-12 {
            // series for sin(angle/2)/angle, accurate to machine precision here
            let s = 0.5 - angle * angle / 48.0;
            return Self::from_parts(phi * s, (0.5 * angle).cos()).normalized();
        }
        Self::from_axis_angle(phi, angle)
    }

    pub fn vector(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn scalar(&self) -> f64 {
        self.w
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z + self.w * self.w).sqrt()
    }

    pub fn is_unit(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Self { x: self.x / n, y: self.y / n, z: self.z / n, w: self.w / n }
    }

    /// Conjugate; equals the inverse for unit quaternions.
    pub fn conjugate(&self) -> Self {
        Self { x: -self.x, y: -self.y, z: -self.z, w: self.w }
    }

    /// Hamilton product without unit checks. Result is renormalized.
    pub(crate) fn mul_unchecked(&self, other: &Quaternion) -> Quaternion {
        let va = self.vector();
        let vb = other.vector();
        let v = vb * self.w + va * other.w + va.cross(&vb);
        let s = self.w * other.w - va.dot(&vb);
        Quaternion::from_parts(v, s).normalized()
    }

    /// Direction cosine matrix mapping body-frame vectors to the chief frame.
    pub fn dcm(&self) -> Mat3 {
        let v = self.vector();
        let w = self.w;
        Mat3::identity() * (w * w - v.dot(&v))
            + v * v.transpose() * 2.0
            + skew(&v) * (2.0 * w)
    }

    /// Rotate a body-frame vector into the chief frame.
    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.dcm() * v
    }

    /// Exact axis-angle propagation over `dt` at constant body rate `omega`.
    pub fn integrate(&self, omega: &Vec3, dt: f64) -> Quaternion {
        self.mul_unchecked(&Quaternion::from_rotation_vector(&(omega * dt)))
    }

    /// Axis-angle vector of this rotation (2·atan2 form, angle in [0, π]).
    pub fn rotation_vector(&self) -> Vec3 {
        let v = self.vector();
        let n = v.norm();
        if n < 1e-15 {
            return v * 2.0;
        }
        let angle = 2.0 * n.atan2(self.w.abs());
        let sign = if self.w < 0.0 { -1.0 } else { 1.0 };
        v * (sign * angle / n)
    }

    /// Rotation angle in radians, in [0, π].
    pub fn angle(&self) -> f64 {
        self.rotation_vector().norm()
    }

    fn check_unit(&self) -> Result<()> {
        let norm = self.norm();
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidQuaternion { norm });
        }
        Ok(())
    }
}

/// Cross-product matrix: `skew(v) * u == v × u`.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Hamilton product of two unit quaternions, renormalized.
///
/// Inputs whose norm deviates from 1 by more than [`UNIT_TOL`] are rejected.
pub fn quat_mul(a: &Quaternion, b: &Quaternion) -> Result<Quaternion> {
    a.check_unit()?;
    b.check_unit()?;
    Ok(a.mul_unchecked(b))
}

/// Conjugate of a quaternion (inverse for unit quaternions).
pub fn quat_conjugate(q: &Quaternion) -> Quaternion {
    q.conjugate()
}

/// Direction cosine matrix of a unit quaternion (body → chief).
pub fn quat_to_dcm(q: &Quaternion) -> Result<Mat3> {
    q.check_unit()?;
    Ok(q.dcm())
}

/// Error quaternion δq with `quat_mul(δq, q_est) == q_true`.
///
/// For small errors the vector part is ≈ δα/2.
pub fn error_quat(q_true: &Quaternion, q_est: &Quaternion) -> Quaternion {
    q_true.mul_unchecked(&q_est.conjugate())
}

/// The 4x3 kinematics matrix `Σ(q) = [w·I₃ + [ϱ×]; −ϱᵀ]` used by the
/// multiplicative attitude reset `q⁺ = q + ½·Σ(q)·δα`.
pub fn sigma_matrix(q: &Quaternion) -> Mat4x3 {
    let top = Mat3::identity() * q.w + skew(&q.vector());
    let v = q.vector();
    let mut m = Mat4x3::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&top);
    m[(3, 0)] = -v.x;
    m[(3, 1)] = -v.y;
    m[(3, 2)] = -v.z;
    m
}

/// Propagate a unit quaternion over `dt` at constant body rate `omega`.
pub fn quat_integrate(q: &Quaternion, omega: &Vec3, dt: f64) -> Quaternion {
    debug_assert!(dt >= 0.0, "negative integration step");
    q.integrate(omega, dt)
}
