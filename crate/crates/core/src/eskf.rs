//! Error-state extended Kalman filter for relative pose.
//!
//! The nominal state carries chief-frame position, chief-frame velocity, and
//! the body→chief attitude quaternion; the gyro bias is fixed at
//! initialization (trimmed just before deployment) and is not estimated. The
//! 9-dimensional error state stacks
//!
//! ```text
//!   [0..3)  δx   position error, chief frame (m)
//!   [3..6)  δv   velocity error, chief frame (m/s)
//!   [6..9)  δα   attitude error, right-multiplicative rotation vector (rad)
//! ```
//!
//! with `q_true = q̂ ⊗ δq(δα)`. The error mean is held at zero through
//! prediction; range updates deposit a δα that the multiplicative reset
//! folds back into the quaternion. Between reset and the next prediction the
//! attitude error is zero again, so attitude uncertainty lives entirely in
//! the covariance.
//!
//! Angular rate comes from the gyro (`ω̂ = z_gyro − b̂`); translation is
//! propagated from commanded thrust in simulation or from logged specific
//! force in replay, both through [`FilterState::predict_specific_force`].

use nalgebra::{SMatrix, SVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::attitude::{sigma_matrix, skew, Quaternion, Vec3};
use crate::error::{Error, Result};
use crate::rigid_body::LeverArm;
use crate::sensors::{Anchor, ImuSample, RangeSample};

/// Error-state dimension: position, velocity, attitude.
pub const STATE_DIM: usize = 9;

pub type Cov9 = SMatrix<f64, 9, 9>;
pub type Vec9 = SVector<f64, 9>;
pub type RowVec9 = SMatrix<f64, 1, 9>;

/// Process and measurement noise levels.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Process-noise PSD per error-state channel; discretized as `Q·dt`.
    pub q_diag: [f64; 9],
    /// Range measurement variance (m²).
    pub r_range: f64,
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.q_diag.iter().any(|q| *q < 0.0) || self.r_range < 0.0 {
            return Err(Error::Configuration("noise levels must be non-negative".into()));
        }
        Ok(())
    }
}

/// Mahalanobis gate configuration.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateConfig {
    /// Chi-square acceptance threshold for the scalar innovation test.
    pub chi2_threshold: f64,
}

impl Default for GateConfig {
    /// 99% quantile of chi-square with one degree of freedom.
    fn default() -> Self {
        Self { chi2_threshold: 6.63 }
    }
}

/// Initial nominal pose and velocity handed to [`FilterState::init`].
#[derive(Clone, Copy, Debug)]
pub struct PoseVelocity {
    pub position: Vec3,
    pub velocity: Vec3,
    pub attitude: Quaternion,
}

/// Outcome of one range measurement update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RangeUpdate {
    pub accepted: bool,
    pub expected: f64,
    pub innovation: f64,
    pub innovation_variance: f64,
}

/// Nominal state, error-state mean, and covariance of the pose filter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterState {
    /// Estimated position, chief frame (m).
    pub position: Vec3,
    /// Estimated velocity, chief frame (m/s); see [`FilterState::body_velocity`].
    pub velocity: Vec3,
    /// Nominal attitude, body → chief.
    pub attitude: Quaternion,
    /// Attitude error mean; zero except between an update and its reset.
    pub delta_alpha: Vec3,
    /// Gyro bias, fixed at initialization (rad/s).
    pub gyro_bias: Vec3,
    /// Most recent bias-corrected rate estimate ω̂ (rad/s).
    pub last_rate: Vec3,
    /// Error-state covariance.
    pub cov: Cov9,
}

fn check_cov(cov: &Cov9) -> Result<()> {
    if (cov - cov.transpose()).amax() > 1e-9 {
        return Err(Error::NotPositiveSemiDefinite("initial covariance is not symmetric".into()));
    }
    let min_eig = cov.symmetric_eigen().eigenvalues.min();
    if min_eig < -1e-10 {
        return Err(Error::NotPositiveSemiDefinite(format!(
            "initial covariance has negative eigenvalue {min_eig}"
        )));
    }
    Ok(())
}

/// Draw from N(0, cov) via the symmetric eigendecomposition (tolerates
/// semi-definite covariances, including zero).
fn sample_gaussian<R: Rng>(cov: &Cov9, rng: &mut R) -> Vec9 {
    let eig = cov.symmetric_eigen();
    let mut z = Vec9::zeros();
    for i in 0..STATE_DIM {
        z[i] = rng.sample::<f64, _>(StandardNormal);
    }
    let mut scaled = Vec9::zeros();
    for i in 0..STATE_DIM {
        scaled[i] = eig.eigenvalues[i].max(0.0).sqrt() * z[i];
    }
    eig.eigenvectors * scaled
}

impl FilterState {
    /// Initialize the filter at `mean`, optionally perturbing the mean with a
    /// draw from `cov0` (the truth-vs-estimate initial offset of a
    /// simulation run).
    pub fn init<R: Rng>(
        mean: &PoseVelocity,
        cov0: &Cov9,
        gyro_bias: Vec3,
        rng: Option<&mut R>,
    ) -> Result<Self> {
        check_cov(cov0)?;
        let mut state = Self {
            position: mean.position,
            velocity: mean.velocity,
            attitude: mean.attitude.normalized(),
            delta_alpha: Vec3::zeros(),
            gyro_bias,
            last_rate: Vec3::zeros(),
            cov: *cov0,
        };
        if let Some(rng) = rng {
            let draw = sample_gaussian(cov0, rng);
            state.position += draw.fixed_rows::<3>(0).clone_owned();
            state.velocity += draw.fixed_rows::<3>(3).clone_owned();
            let da = draw.fixed_rows::<3>(6).clone_owned();
            state.attitude =
                state.attitude.mul_unchecked(&Quaternion::from_rotation_vector(&da));
        }
        Ok(state)
    }

    /// Body-frame velocity `ρ = Rᵀ·ẋ` of the nominal state.
    pub fn body_velocity(&self) -> Vec3 {
        self.attitude.dcm().transpose() * self.velocity
    }

    /// Propagate with a commanded body-frame thrust force (simulation mode).
    pub fn predict(&mut self, imu: &ImuSample, f_cmd_body: &Vec3, mass: f64, dt: f64, nc: &NoiseConfig) {
        self.predict_specific_force(&imu.gyro, &(f_cmd_body / mass), dt, nc);
    }

    /// Propagate with a body-frame specific force (replay mode feeds the
    /// logged accelerometer signal here directly).
    pub fn predict_specific_force(&mut self, gyro: &Vec3, a_body: &Vec3, dt: f64, nc: &NoiseConfig) {
        debug_assert!(dt > 0.0);
        debug_assert_eq!(self.delta_alpha, Vec3::zeros(), "predict requires a reset error state");

        let omega_hat = gyro - self.gyro_bias;
        self.last_rate = omega_hat;

        let r = self.attitude.dcm();
        let a_chief = r * a_body;

        // error-state transition: δv couples to δα through the rotated thrust,
        // δα rotates by exp(−[ω̂×]·dt)
        let mut f = Cov9::identity();
        f.fixed_view_mut::<3, 3>(0, 3).copy_from(&(crate::attitude::Mat3::identity() * dt));
        f.fixed_view_mut::<3, 3>(3, 6).copy_from(&(-(r * skew(a_body)) * dt));
        let att_rot = Quaternion::from_rotation_vector(&(-omega_hat * dt)).dcm();
        f.fixed_view_mut::<3, 3>(6, 6).copy_from(&att_rot);

        self.position += self.velocity * dt + a_chief * (0.5 * dt * dt);
        self.velocity += a_chief * dt;
        self.attitude = self.attitude.integrate(&omega_hat, dt);

        let mut q_d = Cov9::zeros();
        for i in 0..STATE_DIM {
            q_d[(i, i)] = nc.q_diag[i] * dt;
        }
        self.cov = f * self.cov * f.transpose() + q_d;
        self.symmetrize();
    }

    /// Expected range `y = ‖x̂ + R(q̂)·P_tag − ρ_A‖` to an anchor.
    pub fn expected_range(&self, anchor: &Anchor, tag_arm: &LeverArm) -> Result<f64> {
        let tag = self.position + self.attitude.rotate(&tag_arm.vector());
        let range = (tag - anchor.position).norm();
        if range < 1e-6 {
            return Err(Error::DegenerateGeometry(format!(
                "estimated tag position coincides with anchor {}",
                anchor.id
            )));
        }
        Ok(range)
    }

    /// Measurement Jacobian `H = [uᵀ, 0, −uᵀ·R·[P_tag×]]` with `u` the unit
    /// vector from the anchor to the estimated tag position.
    pub fn range_jacobian(&self, anchor: &Anchor, tag_arm: &LeverArm) -> Result<RowVec9> {
        let r = self.attitude.dcm();
        let tag = self.position + r * tag_arm.vector();
        let delta = tag - anchor.position;
        let range = delta.norm();
        if range < 1e-6 {
            return Err(Error::DegenerateGeometry(format!(
                "near-zero range to anchor {}",
                anchor.id
            )));
        }
        let u = delta / range;
        let att_block = -(u.transpose() * r * skew(&tag_arm.vector()));
        let mut h = RowVec9::zeros();
        h.fixed_view_mut::<1, 3>(0, 0).copy_from(&u.transpose());
        h.fixed_view_mut::<1, 3>(0, 6).copy_from(&att_block);
        Ok(h)
    }

    /// Apply one gated scalar range update (Joseph-form covariance).
    ///
    /// A rejected measurement leaves the state bitwise untouched.
    pub fn update(
        &mut self,
        meas: &RangeSample,
        anchor: &Anchor,
        tag_arm: &LeverArm,
        nc: &NoiseConfig,
        g: &GateConfig,
    ) -> Result<RangeUpdate> {
        debug_assert_eq!(meas.anchor_id, anchor.id, "measurement routed to wrong anchor");
        let expected = self.expected_range(anchor, tag_arm)?;
        let h = self.range_jacobian(anchor, tag_arm)?;
        let s = (h * self.cov * h.transpose())[(0, 0)] + nc.r_range;
        let innovation = meas.range - expected;
        if !gate(innovation, s, g)? {
            return Ok(RangeUpdate { accepted: false, expected, innovation, innovation_variance: s });
        }

        let k: Vec9 = self.cov * h.transpose() / s;
        let correction = k * innovation;
        self.position += correction.fixed_rows::<3>(0).clone_owned();
        self.velocity += correction.fixed_rows::<3>(3).clone_owned();
        self.delta_alpha += correction.fixed_rows::<3>(6).clone_owned();

        let i_kh = Cov9::identity() - k * h;
        self.cov = i_kh * self.cov * i_kh.transpose() + k * nc.r_range * k.transpose();
        self.symmetrize();

        Ok(RangeUpdate { accepted: true, expected, innovation, innovation_variance: s })
    }

    /// Fold the accumulated attitude error into the nominal quaternion:
    /// `q̂⁺ = normalize(q̂ + ½·Σ(q̂)·δα)`, then zero the error vector.
    /// The covariance is left unchanged (first-order reset Jacobian ≈ I).
    pub fn reset(&mut self) {
        if self.delta_alpha == Vec3::zeros() {
            return;
        }
        debug_assert!(self.delta_alpha.norm() < std::f64::consts::PI, "attitude error outside small-angle validity");
        let s = sigma_matrix(&self.attitude) * self.delta_alpha;
        self.attitude = Quaternion::new(
            self.attitude.x + 0.5 * s[0],
            self.attitude.y + 0.5 * s[1],
            self.attitude.z + 0.5 * s[2],
            self.attitude.w + 0.5 * s[3],
        )
        .normalized();
        self.delta_alpha = Vec3::zeros();
    }

    fn symmetrize(&mut self) {
        self.cov = (self.cov + self.cov.transpose()) * 0.5;
    }
}

/// Scalar Mahalanobis gate: accept iff `ν²/S ≤ χ²`, ties accepted.
pub fn gate(innovation: f64, s: f64, g: &GateConfig) -> Result<bool> {
    if !(s > 0.0) {
        return Err(Error::NumericalFailure(format!(
            "innovation variance {s} must be positive"
        )));
    }
    Ok(innovation * innovation / s <= g.chi2_threshold)
}
