//! Truth-side six-degree-of-freedom dynamics of the deputy module.
//!
//! Translation follows `m·ẍ = R(q)·f` with no gravity term (chief and deputy
//! share the same gravitational acceleration). Attitude kinematics follow
//! `Ṙ = R·[ω×]` with rates driven by Euler's rigid-body equation. Mounted
//! sensors pick up lever-arm terms at velocity and acceleration level.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::attitude::{Mat3, Quaternion, Vec3};
use crate::error::{Error, Result};

/// Mass and (body-frame) inertia of the deputy.
#[derive(Clone, Copy, Debug)]
pub struct MassProperties {
    mass: f64,
    inertia: Mat3,
    inertia_inv: Mat3,
}

impl MassProperties {
    /// `mass > 0`, `inertia` symmetric positive definite.
    pub fn new(mass: f64, inertia: Mat3) -> Result<Self> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::Configuration(format!("mass must be positive, got {mass}")));
        }
        if (inertia - inertia.transpose()).amax() > 1e-9 {
            return Err(Error::NotPositiveSemiDefinite("inertia tensor is not symmetric".into()));
        }
        let eig = inertia.symmetric_eigen();
        if eig.eigenvalues.min() <= 0.0 {
            return Err(Error::NotPositiveSemiDefinite(
                "inertia tensor is not positive definite".into(),
            ));
        }
        let inertia_inv = inertia
            .try_inverse()
            .ok_or_else(|| Error::Configuration("inertia tensor is singular".into()))?;
        Ok(Self { mass, inertia, inertia_inv })
    }

    pub fn from_diagonal(mass: f64, diag: Vec3) -> Result<Self> {
        Self::new(mass, Mat3::from_diagonal(&diag))
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn inertia(&self) -> &Mat3 {
        &self.inertia
    }
}

/// True pose and velocities of the deputy.
///
/// `position`/`velocity` are chief-frame, `rate` is the body-frame angular
/// velocity, `attitude` maps body → chief.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidBodyState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub attitude: Quaternion,
    pub rate: Vec3,
}

impl RigidBodyState {
    pub fn at_rest(position: Vec3) -> Self {
        Self { position, velocity: Vec3::zeros(), attitude: Quaternion::identity(), rate: Vec3::zeros() }
    }
}

/// Body-frame offset of a mounted sensor from the center of mass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vector3<f64>", into = "Vector3<f64>")]
pub struct LeverArm {
    offset: Vec3,
}

impl LeverArm {
    pub const ZERO: LeverArm = LeverArm { offset: Vector3::new(0.0, 0.0, 0.0) };

    /// Offsets are sanity-bounded below 1 m for a 1U module on a testbed.
    pub fn new(offset: Vec3) -> Result<Self> {
        if !offset.iter().all(|c| c.is_finite()) || offset.norm() >= 1.0 {
            return Err(Error::Configuration(format!(
                "lever arm {:?} must be finite with magnitude < 1 m",
                offset
            )));
        }
        Ok(Self { offset })
    }

    pub fn vector(&self) -> Vec3 {
        self.offset
    }

    pub fn is_zero(&self) -> bool {
        self.offset == Vec3::zeros()
    }
}

impl TryFrom<Vector3<f64>> for LeverArm {
    type Error = Error;
    fn try_from(v: Vector3<f64>) -> Result<Self> {
        LeverArm::new(v)
    }
}

impl From<LeverArm> for Vector3<f64> {
    fn from(arm: LeverArm) -> Self {
        arm.offset
    }
}

/// Body-frame force and torque acting on the deputy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Wrench {
    pub force: Vec3,
    pub torque: Vec3,
}

impl Wrench {
    pub const ZERO: Wrench = Wrench { force: Vector3::new(0.0, 0.0, 0.0), torque: Vector3::new(0.0, 0.0, 0.0) };

    pub fn force_only(force: Vec3) -> Self {
        Self { force, torque: Vec3::zeros() }
    }
}

/// Chief-frame translational acceleration `(1/m)·R(q)·f` of the deputy.
pub fn translational_accel(state: &RigidBodyState, f_body: &Vec3, mp: &MassProperties) -> Vec3 {
    state.attitude.rotate(f_body) / mp.mass
}

/// Body-frame angular acceleration `J⁻¹(τ − ω × Jω)`.
pub fn rotational_accel(rate: &Vec3, torque: &Vec3, mp: &MassProperties) -> Vec3 {
    mp.inertia_inv * (torque - rate.cross(&(mp.inertia * rate)))
}

/// Velocity of a mounted sensor: `ρ̇ + ω × P`, all in a common frame.
pub fn tag_velocity(rho_dot: &Vec3, omega: &Vec3, arm: &LeverArm) -> Vec3 {
    rho_dot + omega.cross(&arm.vector())
}

/// Acceleration of a mounted sensor: `ρ̈ + ω̇ × P + ω × (ω × P)`.
pub fn tag_accel(rho_ddot: &Vec3, omega_dot: &Vec3, omega: &Vec3, arm: &LeverArm) -> Vec3 {
    let p = arm.vector();
    rho_ddot + omega_dot.cross(&p) + omega.cross(&omega.cross(&p))
}

struct Derivative {
    vel: Vec3,
    acc: Vec3,
    rate_dot: Vec3,
}

fn derivative(attitude: &Quaternion, velocity: &Vec3, rate: &Vec3, w: &Wrench, mp: &MassProperties) -> Derivative {
    Derivative {
        vel: *velocity,
        acc: attitude.rotate(&w.force) / mp.mass,
        rate_dot: rotational_accel(rate, &w.torque, mp),
    }
}

/// One fixed-step RK4 integration step under a constant body-frame wrench.
///
/// Translation and body rates use classical RK4 with the attitude advanced
/// by the stage-local axis-angle exponential, so a spinning, thrusting body
/// retains 4th-order translation accuracy. The state quaternion itself is
/// propagated with the midpoint rate and renormalized.
pub fn step(state: &RigidBodyState, w: &Wrench, mp: &MassProperties, dt: f64) -> RigidBodyState {
    debug_assert!(dt > 0.0 && dt <= 0.1, "step size {dt} outside (0, 0.1] s");
    let q0 = state.attitude;
    let half = 0.5 * dt;

    let k1 = derivative(&q0, &state.velocity, &state.rate, w, mp);

    let w2 = state.rate + k1.rate_dot * half;
    let q2 = q0.integrate(&((state.rate + w2) * 0.5), half);
    let k2 = derivative(&q2, &(state.velocity + k1.acc * half), &w2, w, mp);

    let w3 = state.rate + k2.rate_dot * half;
    let q3 = q0.integrate(&((state.rate + w3) * 0.5), half);
    let k3 = derivative(&q3, &(state.velocity + k2.acc * half), &w3, w, mp);

    let w4 = state.rate + k3.rate_dot * dt;
    let q4 = q0.integrate(&((state.rate + w4) * 0.5), dt);
    let k4 = derivative(&q4, &(state.velocity + k3.acc * dt), &w4, w, mp);

    let sixth = dt / 6.0;
    let position = state.position + (k1.vel + (k2.vel + k3.vel) * 2.0 + k4.vel) * sixth;
    let velocity = state.velocity + (k1.acc + (k2.acc + k3.acc) * 2.0 + k4.acc) * sixth;
    let rate = state.rate + (k1.rate_dot + (k2.rate_dot + k3.rate_dot) * 2.0 + k4.rate_dot) * sixth;
    let attitude = q0.integrate(&((state.rate + rate) * 0.5), dt);

    RigidBodyState { position, velocity, attitude, rate }
}
