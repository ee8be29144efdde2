//! Synthetic measurement generation.
//!
//! Rate gyro follows Farrenkopf's error model (white noise plus a random-walk
//! bias, with the walk disabled by default since biases are trimmed just
//! before deployment). The accelerometer mirrors the gyro structure and
//! measures gravity-free body-frame specific force. UWB ranging is
//! time-of-flight with a Gaussian noise core and a resampled outlier mixture.
//!
//! Every generator draws from a caller-supplied seeded stream, so identical
//! seeds reproduce identical sample sequences bit for bit.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::attitude::Vec3;
use crate::error::{Error, Result};

/// Farrenkopf rate-gyro model: `z = ω + η + b`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GyroModel {
    /// White-noise standard deviation per axis (rad/s).
    pub sigma_rate: f64,
    /// Bias random-walk driver (rad/s/√s); zero keeps the bias constant.
    pub sigma_bias_walk: f64,
    /// Current bias (rad/s).
    pub bias: Vec3,
}

impl GyroModel {
    pub fn validate(&self) -> Result<()> {
        if self.sigma_rate < 0.0 || self.sigma_bias_walk < 0.0 {
            return Err(Error::Configuration("gyro noise levels must be non-negative".into()));
        }
        Ok(())
    }
}

/// Accelerometer model: bias plus white noise on body-frame specific force.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccelModel {
    /// White-noise standard deviation per axis (m/s²).
    pub sigma: f64,
    /// Constant bias (m/s²).
    pub bias: Vec3,
}

impl AccelModel {
    pub fn validate(&self) -> Result<()> {
        if self.sigma < 0.0 {
            return Err(Error::Configuration("accelerometer noise must be non-negative".into()));
        }
        Ok(())
    }
}

/// UWB time-of-flight range model with outlier mixture.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UwbModel {
    /// Inlier range standard deviation (m).
    pub sigma_range: f64,
    /// Fraction of samples resampled as outliers, in [0, 1].
    pub outlier_fraction: f64,
    /// Outlier standard deviation (m); at least `sigma_range`.
    pub sigma_outlier: f64,
}

impl Default for UwbModel {
    fn default() -> Self {
        Self { sigma_range: 0.01, outlier_fraction: 0.10, sigma_outlier: 0.10 }
    }
}

impl UwbModel {
    pub fn validate(&self) -> Result<()> {
        if self.sigma_range < 0.0 {
            return Err(Error::Configuration("sigma_range must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.outlier_fraction) {
            return Err(Error::Configuration("outlier_fraction must lie in [0, 1]".into()));
        }
        if self.sigma_outlier < self.sigma_range {
            return Err(Error::Configuration("sigma_outlier must be >= sigma_range".into()));
        }
        Ok(())
    }
}

/// Fixed UWB anchor in the chief frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Anchor {
    pub id: u32,
    pub position: Vec3,
}

/// Set of anchors with unique ids.
#[derive(Clone, Debug)]
pub struct AnchorSet {
    anchors: Vec<Anchor>,
}

impl AnchorSet {
    pub fn new(anchors: Vec<Anchor>) -> Result<Self> {
        for (i, a) in anchors.iter().enumerate() {
            if anchors[..i].iter().any(|b| b.id == a.id) {
                return Err(Error::Configuration(format!("duplicate anchor id {}", a.id)));
            }
        }
        Ok(Self { anchors })
    }

    pub fn get(&self, id: u32) -> Option<&Anchor> {
        self.anchors.iter().find(|a| a.id == id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Anchor> {
        self.anchors.iter()
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }
}

/// One IMU reading: body rates and body-frame specific force.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImuSample {
    pub t: f64,
    pub gyro: Vec3,
    pub accel: Vec3,
}

/// One UWB range reading. `outlier` records the injection branch taken at
/// generation; it is bookkeeping only and never consumed by the estimator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeSample {
    pub t: f64,
    pub anchor_id: u32,
    pub range: f64,
    pub outlier: bool,
}

fn randn3<R: Rng>(rng: &mut R) -> Vec3 {
    Vec3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Sample the gyro: `z = ω + b + N(0, σ²)` per axis.
pub fn gyro_measure<R: Rng>(omega_true: &Vec3, model: &GyroModel, rng: &mut R) -> Vec3 {
    omega_true + model.bias + randn3(rng) * model.sigma_rate
}

/// Advance the gyro bias random walk by one step of length `dt`.
pub fn bias_walk_step<R: Rng>(model: &GyroModel, dt: f64, rng: &mut R) -> Result<GyroModel> {
    if !(dt > 0.0) {
        return Err(Error::Configuration(format!("bias walk step requires dt > 0, got {dt}")));
    }
    let mut next = *model;
    next.bias += randn3(rng) * (model.sigma_bias_walk * dt.sqrt());
    Ok(next)
}

/// Sample the accelerometer: `z = a + b + N(0, σ²)` on body specific force.
pub fn accel_measure<R: Rng>(a_true_body: &Vec3, model: &AccelModel, rng: &mut R) -> Vec3 {
    a_true_body + model.bias + randn3(rng) * model.sigma
}

/// Sample one time-of-flight range from tag position to an anchor.
///
/// With probability `outlier_fraction` the sample is resampled from the
/// wider outlier distribution; negative draws clamp to zero.
pub fn uwb_measure<R: Rng>(
    t: f64,
    tag_pos: &Vec3,
    anchor: &Anchor,
    model: &UwbModel,
    rng: &mut R,
) -> Result<RangeSample> {
    let true_range = (tag_pos - anchor.position).norm();
    if true_range < 1e-12 {
        return Err(Error::DegenerateGeometry(format!(
            "tag coincides with anchor {} at {:?}",
            anchor.id, anchor.position
        )));
    }
    let is_outlier = rng.random::<f64>() < model.outlier_fraction;
    let sigma = if is_outlier { model.sigma_outlier } else { model.sigma_range };
    let noise: f64 = rng.sample::<f64, _>(StandardNormal) * sigma;
    Ok(RangeSample {
        t,
        anchor_id: anchor.id,
        range: (true_range + noise).max(0.0),
        outlier: is_outlier,
    })
}

/// Pick one anchor uniformly at random for this measurement epoch.
pub fn pick_anchor<'a, R: Rng>(set: &'a AnchorSet, rng: &mut R) -> Result<&'a Anchor> {
    if set.is_empty() {
        return Err(Error::Configuration("anchor set is empty".into()));
    }
    let idx = rng.random_range(0..set.len());
    Ok(&set.anchors[idx])
}
