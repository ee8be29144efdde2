//! Closed-loop guidance and control: full-state LQR on the estimated pose,
//! chief→body force transformation, constrained thrust allocation, and a
//! planar line-of-sight steering law.

mod allocate;
mod lqr;

pub use allocate::{allocate, Allocation, Thruster, ThrusterConfig};
pub use lqr::{lqr_design, LqrGains};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::attitude::{Quaternion, Vec3};
use crate::error::{Error, Result};
use crate::eskf::FilterState;
use crate::rigid_body::MassProperties;

/// Commanded pose and velocities.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Setpoint {
    /// Desired position, chief frame (m).
    pub position: Vec3,
    /// Desired velocity, chief frame (m/s).
    pub velocity: Vec3,
    /// Desired attitude, body → chief.
    pub attitude: Quaternion,
    /// Desired body rates (rad/s).
    pub rate: Vec3,
}

impl Setpoint {
    pub fn hold(position: Vec3, attitude: Quaternion) -> Self {
        Self { position, velocity: Vec3::zeros(), attitude, rate: Vec3::zeros() }
    }
}

/// LQR weights for the 12-state pose regulator.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LqrWeights {
    pub q_pos: f64,
    pub q_vel: f64,
    pub q_att: f64,
    pub q_rate: f64,
    pub r_force: f64,
    pub r_torque: f64,
}

impl Default for LqrWeights {
    /// Position/velocity weights sized for decimeter-scale captures; attitude
    /// weights sized so the rate gain stays stable when sampled at 100 Hz
    /// with a small (1U-class) inertia.
    fn default() -> Self {
        Self { q_pos: 100.0, q_vel: 10.0, q_att: 0.01, q_rate: 0.001, r_force: 1.0, r_torque: 100.0 }
    }
}

/// Saturation applied to the commanded wrench before allocation.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlLimits {
    /// Componentwise limit on commanded force (N).
    pub force: f64,
    /// Componentwise limit on commanded torque (N·m).
    pub torque: f64,
}

impl Default for ControlLimits {
    fn default() -> Self {
        Self { force: 0.6, torque: 0.01 }
    }
}

/// Commanded chief-frame force and body-frame torque.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlCommand {
    pub force_chief: Vec3,
    pub torque_body: Vec3,
}

/// Design the 12-state pose regulator (translation and attitude double
/// integrators with the actual mass and inertia in the input map).
pub fn design_pose_regulator(weights: &LqrWeights, mp: &MassProperties) -> Result<LqrGains> {
    let n = 12;
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DMatrix::<f64>::zeros(n, 6);
    let inertia_inv = mp
        .inertia()
        .try_inverse()
        .ok_or_else(|| Error::ControlDesign("singular inertia tensor".into()))?;
    for i in 0..3 {
        a[(i, 3 + i)] = 1.0;
        a[(6 + i, 9 + i)] = 1.0;
        b[(3 + i, i)] = 1.0 / mp.mass();
        for j in 0..3 {
            b[(9 + i, 3 + j)] = inertia_inv[(i, j)];
        }
    }
    let mut q = DVector::<f64>::zeros(n);
    let mut r = DVector::<f64>::zeros(6);
    for i in 0..3 {
        q[i] = weights.q_pos;
        q[3 + i] = weights.q_vel;
        q[6 + i] = weights.q_att;
        q[9 + i] = weights.q_rate;
        r[i] = weights.r_force;
        r[3 + i] = weights.r_torque;
    }
    lqr_design(&a, &b, &DMatrix::from_diagonal(&q), &DMatrix::from_diagonal(&r))
}

/// Attitude error of the estimate relative to the setpoint, as a
/// right-multiplicative (body-frame) rotation vector with the shortest-path
/// sign convention.
fn attitude_error(q_est: &Quaternion, q_sp: &Quaternion) -> Vec3 {
    let mut dq = q_sp.conjugate().mul_unchecked(q_est);
    if dq.w < 0.0 {
        dq = Quaternion::new(-dq.x, -dq.y, -dq.z, -dq.w);
    }
    dq.vector() * 2.0
}

/// Full-state feedback `u = −K·(state − setpoint)` with componentwise
/// saturation. Force comes out in the chief frame; torque in the body frame.
pub fn compute_control(
    est: &FilterState,
    sp: &Setpoint,
    gains: &LqrGains,
    limits: &ControlLimits,
) -> ControlCommand {
    debug_assert_eq!(gains.n_states(), 12);
    debug_assert_eq!(gains.n_inputs(), 6);
    let mut e = DVector::<f64>::zeros(12);
    let d_pos = est.position - sp.position;
    let d_vel = est.velocity - sp.velocity;
    let d_att = attitude_error(&est.attitude, &sp.attitude);
    let d_rate = est.last_rate - sp.rate;
    for i in 0..3 {
        e[i] = d_pos[i];
        e[3 + i] = d_vel[i];
        e[6 + i] = d_att[i];
        e[9 + i] = d_rate[i];
    }
    let u = -(gains.matrix() * e);
    let clamp = |v: f64, lim: f64| v.clamp(-lim, lim);
    ControlCommand {
        force_chief: Vec3::new(
            clamp(u[0], limits.force),
            clamp(u[1], limits.force),
            clamp(u[2], limits.force),
        ),
        torque_body: Vec3::new(
            clamp(u[3], limits.torque),
            clamp(u[4], limits.torque),
            clamp(u[5], limits.torque),
        ),
    }
}

/// Re-express a chief-frame force in the deputy body frame: `f_b = R(q̂)ᵀ·f`.
pub fn to_body_frame(f_chief: &Vec3, q_est: &Quaternion) -> Vec3 {
    q_est.dcm().transpose() * f_chief
}

/// Planar line-of-sight guidance: heading correction from the body forward
/// axis (+x) toward the target, and a distance-proportional forward speed
/// saturated at `v_max`. Returns zero command when already at the target.
pub fn los_guidance(
    pos_est: &Vec3,
    q_est: &Quaternion,
    target: &Vec3,
    k_v: f64,
    v_max: f64,
) -> (f64, f64) {
    let los = target - pos_est;
    let los_xy = Vec3::new(los.x, los.y, 0.0);
    if los_xy.norm() < 1e-9 {
        return (0.0, 0.0);
    }
    let fwd = q_est.rotate(&Vec3::x());
    let fwd_xy = Vec3::new(fwd.x, fwd.y, 0.0);
    let heading = (fwd_xy.x * los_xy.y - fwd_xy.y * los_xy.x).atan2(fwd_xy.dot(&los_xy));
    let speed = (k_v * los_xy.norm()).min(v_max);
    (heading, speed)
}
