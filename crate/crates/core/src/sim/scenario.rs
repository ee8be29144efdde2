//! Scenario configuration and the built-in presets.
//!
//! A [`ScenarioConfig`] captures everything a run needs — geometry, noise
//! levels, initial conditions, controller weights, and the seed — so that a
//! (config, seed) pair reproduces a run bit for bit.

use serde::{Deserialize, Serialize};

use crate::attitude::{Quaternion, Vec3};
use crate::control::{ControlLimits, LqrWeights, Setpoint, Thruster, ThrusterConfig};
use crate::error::{Error, Result};
use crate::eskf::{GateConfig, NoiseConfig};
use crate::rigid_body::{LeverArm, MassProperties, RigidBodyState};
use crate::sensors::{AccelModel, Anchor, AnchorSet, GyroModel, UwbModel};

/// Which loop the scenario runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Fig.-6-style loop: truth and estimate propagate in parallel, the
    /// controller acts on the estimate, both receive the same thrust.
    ClosedLoop,
    /// Pure rotation about a fixed center with an offset tag; filter runs
    /// open loop.
    TurntableOpenLoop,
    /// Open-loop constant-acceleration thrust program alternating +x, +y,
    /// −x, −y; no rotation commanded.
    TranslationOnly,
}

/// Initial truth state.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthInit {
    pub position: Vec3,
    pub velocity: Vec3,
    pub attitude: Quaternion,
    pub rate: Vec3,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassConfig {
    pub mass: f64,
    pub inertia_diag: Vec3,
}

/// Filter initialization and tuning.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    /// Initial covariance diagonal over (δx, δv, δα).
    pub p0_diag: [f64; 9],
    /// Process-noise PSD diagonal.
    pub q_diag: [f64; 9],
    /// Range measurement variance (m²).
    pub r_range: f64,
    /// Mahalanobis gate threshold (χ², 1 DOF).
    pub chi2_threshold: f64,
    /// Error of the filter's trimmed bias knowledge: `b̂ = b_true + error`.
    pub gyro_bias_error: Vec3,
}

/// Constant-acceleration program for [`Mode::TranslationOnly`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranslationProgram {
    /// Commanded acceleration magnitude (m/s²).
    pub accel: f64,
    /// Duration of each +x / +y / −x / −y phase (s).
    pub phase_duration: f64,
}

/// Controller weights, saturation, and optional LOS heading override.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub weights: LqrWeights,
    pub limits: ControlLimits,
    /// When set, the attitude setpoint is steered by line-of-sight guidance
    /// toward the position setpoint until within `los_freeze_radius`.
    pub los_attitude: bool,
    pub los_gain: f64,
    pub los_speed_limit: f64,
    pub los_freeze_radius: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            weights: LqrWeights::default(),
            limits: ControlLimits::default(),
            los_attitude: false,
            los_gain: 0.1,
            los_speed_limit: 0.05,
            los_freeze_radius: 0.1,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetpointConfig {
    pub position: Vec3,
    pub velocity: Vec3,
    pub attitude: Quaternion,
    pub rate: Vec3,
}

impl From<SetpointConfig> for Setpoint {
    fn from(sp: SetpointConfig) -> Self {
        Setpoint { position: sp.position, velocity: sp.velocity, attitude: sp.attitude, rate: sp.rate }
    }
}

/// Complete, serializable description of one scenario run.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub mode: Mode,
    /// Run length (s).
    pub duration: f64,
    /// Control / IMU step (s).
    pub dt: f64,
    /// Seed for every random stream of the run.
    pub seed: u64,
    /// A range measurement arrives every `uwb_every`-th epoch.
    pub uwb_every: u32,
    /// Perturb the filter's initial mean by a draw from `p0_diag`.
    pub sample_initial_mean: bool,
    /// Body-frame lever arm of the UWB tag (truth side).
    pub tag_arm: Vec3,
    /// Body-frame lever arm of the IMU (zero for the supported scenarios).
    pub imu_arm: Vec3,
    /// Lever arm the *filter* assumes for the tag; `None` mirrors `tag_arm`.
    pub filter_tag_arm: Option<Vec3>,
    pub truth: TruthInit,
    pub mass: MassConfig,
    pub gyro: GyroModel,
    pub accel: AccelModel,
    pub uwb: UwbModel,
    pub filter: FilterConfig,
    pub setpoint: SetpointConfig,
    pub translation: Option<TranslationProgram>,
    pub controller: ControllerConfig,
    pub anchors: Vec<Anchor>,
    pub thrusters: Vec<Thruster>,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) {
            return Err(Error::Configuration("duration must be positive".into()));
        }
        if !(self.dt > 0.0 && self.dt <= 0.1) {
            return Err(Error::Configuration(format!("dt {} outside (0, 0.1] s", self.dt)));
        }
        if self.uwb_every == 0 {
            return Err(Error::Configuration("uwb_every must be at least 1".into()));
        }
        if !self.truth.attitude.is_unit(1e-6) || !self.setpoint.attitude.is_unit(1e-6) {
            return Err(Error::Configuration("attitude quaternions must be unit".into()));
        }
        self.gyro.validate()?;
        self.accel.validate()?;
        self.uwb.validate()?;
        self.noise_config().validate()?;
        if self.filter.p0_diag.iter().any(|p| *p < 0.0) {
            return Err(Error::Configuration("p0_diag entries must be non-negative".into()));
        }
        if !(self.filter.chi2_threshold > 0.0) {
            return Err(Error::Configuration("chi2_threshold must be positive".into()));
        }
        self.anchor_set()?;
        self.mass_properties()?;
        LeverArm::new(self.tag_arm)?;
        LeverArm::new(self.imu_arm)?;
        if let Some(arm) = self.filter_tag_arm {
            LeverArm::new(arm)?;
        }
        match self.mode {
            Mode::ClosedLoop => {
                self.thruster_config()?;
            }
            Mode::TurntableOpenLoop => {
                if self.imu_arm != Vec3::zeros() {
                    return Err(Error::Configuration(
                        "turntable scenarios require the IMU at the center of rotation".into(),
                    ));
                }
                if self.tag_arm == Vec3::zeros() {
                    return Err(Error::Configuration(
                        "turntable scenarios require a non-zero tag lever arm".into(),
                    ));
                }
            }
            Mode::TranslationOnly => {
                let program = self
                    .translation
                    .ok_or_else(|| Error::Configuration("translation_only mode needs [translation]".into()))?;
                if !(program.accel >= 0.0) || !(program.phase_duration > 0.0) {
                    return Err(Error::Configuration("invalid translation program".into()));
                }
            }
        }
        Ok(())
    }

    pub fn n_epochs(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn mass_properties(&self) -> Result<MassProperties> {
        MassProperties::from_diagonal(self.mass.mass, self.mass.inertia_diag)
    }

    pub fn anchor_set(&self) -> Result<AnchorSet> {
        if self.anchors.is_empty() {
            return Err(Error::Configuration("at least one anchor is required".into()));
        }
        AnchorSet::new(self.anchors.clone())
    }

    pub fn thruster_config(&self) -> Result<ThrusterConfig> {
        ThrusterConfig::new(self.thrusters.clone())
    }

    pub fn noise_config(&self) -> NoiseConfig {
        NoiseConfig { q_diag: self.filter.q_diag, r_range: self.filter.r_range }
    }

    pub fn gate_config(&self) -> GateConfig {
        GateConfig { chi2_threshold: self.filter.chi2_threshold }
    }

    pub fn initial_truth(&self) -> RigidBodyState {
        RigidBodyState {
            position: self.truth.position,
            velocity: self.truth.velocity,
            attitude: self.truth.attitude.normalized(),
            rate: self.truth.rate,
        }
    }

    /// Lever arm the filter assumes for the tag.
    pub fn filter_arm(&self) -> Result<LeverArm> {
        LeverArm::new(self.filter_tag_arm.unwrap_or(self.tag_arm))
    }
}

fn square_anchors(half: f64, z: f64, id0: u32) -> Vec<Anchor> {
    vec![
        Anchor { id: id0, position: Vec3::new(half, half, z) },
        Anchor { id: id0 + 1, position: Vec3::new(-half, half, z) },
        Anchor { id: id0 + 2, position: Vec3::new(-half, -half, z) },
        Anchor { id: id0 + 3, position: Vec3::new(half, -half, z) },
    ]
}

fn base_filter_config() -> FilterConfig {
    FilterConfig {
        p0_diag: [2.5e-3, 2.5e-3, 2.5e-3, 4e-4, 4e-4, 4e-4, 4e-4, 4e-4, 4e-4],
        q_diag: [1e-8, 1e-8, 1e-8, 4e-4, 4e-4, 4e-4, 5e-4, 5e-4, 5e-4],
        r_range: 1e-4,
        chi2_threshold: 6.63,
        gyro_bias_error: Vec3::zeros(),
    }
}

/// Paper-class cold-gas thrust level for the default 1 kg module.
fn scaled_default_thrusters(f_max: f64) -> Vec<Thruster> {
    ThrusterConfig::default_layout()
        .thrusters()
        .iter()
        .map(|t| Thruster { f_max, ..*t })
        .collect()
}

/// Constant-acceleration alternating X/Y translation inside a planar anchor
/// square; open loop, identity attitude throughout.
pub fn translation_xy() -> ScenarioConfig {
    ScenarioConfig {
        name: "translation_xy".into(),
        mode: Mode::TranslationOnly,
        duration: 40.0,
        dt: 0.01,
        seed: 7,
        uwb_every: 10,
        sample_initial_mean: true,
        tag_arm: Vec3::zeros(),
        imu_arm: Vec3::zeros(),
        filter_tag_arm: None,
        truth: TruthInit {
            position: Vec3::zeros(),
            velocity: Vec3::zeros(),
            attitude: Quaternion::identity(),
            rate: Vec3::zeros(),
        },
        mass: MassConfig { mass: 1.0, inertia_diag: Vec3::new(0.0017, 0.0017, 0.0017) },
        gyro: GyroModel { sigma_rate: 0.0035, sigma_bias_walk: 0.0, bias: Vec3::zeros() },
        accel: AccelModel { sigma: 0.02, bias: Vec3::zeros() },
        uwb: UwbModel::default(),
        filter: base_filter_config(),
        setpoint: SetpointConfig {
            position: Vec3::zeros(),
            velocity: Vec3::zeros(),
            attitude: Quaternion::identity(),
            rate: Vec3::zeros(),
        },
        translation: Some(TranslationProgram { accel: 0.01, phase_duration: 10.0 }),
        controller: ControllerConfig::default(),
        anchors: square_anchors(2.0, 0.0, 0),
        thrusters: vec![],
    }
}

/// Combined translation + rotation capture of a commanded pose under range
/// feedback; the acceptance scenario for filter consistency.
pub fn pose_acquisition() -> ScenarioConfig {
    let mut anchors = square_anchors(2.0, -0.3, 0);
    anchors.extend(square_anchors(2.0, 0.3, 4));
    ScenarioConfig {
        name: "pose_acquisition".into(),
        mode: Mode::ClosedLoop,
        duration: 40.0,
        dt: 0.01,
        seed: 1,
        uwb_every: 10,
        sample_initial_mean: true,
        tag_arm: Vec3::zeros(),
        imu_arm: Vec3::zeros(),
        filter_tag_arm: None,
        truth: TruthInit {
            position: Vec3::new(1.2, -0.8, 0.3),
            velocity: Vec3::zeros(),
            attitude: Quaternion::identity(),
            rate: Vec3::zeros(),
        },
        mass: MassConfig { mass: 1.0, inertia_diag: Vec3::new(0.0017, 0.0017, 0.0017) },
        gyro: GyroModel {
            sigma_rate: 0.0035,
            sigma_bias_walk: 0.0,
            bias: Vec3::new(0.005, -0.003, 0.004),
        },
        accel: AccelModel { sigma: 0.02, bias: Vec3::zeros() },
        uwb: UwbModel::default(),
        filter: FilterConfig {
            gyro_bias_error: Vec3::new(0.002, -0.002, 0.002),
            ..base_filter_config()
        },
        setpoint: SetpointConfig {
            position: Vec3::new(0.2, 0.3, 0.0),
            velocity: Vec3::zeros(),
            attitude: Quaternion::from_axis_angle(&Vec3::z(), std::f64::consts::FRAC_PI_3),
            rate: Vec3::zeros(),
        },
        translation: None,
        controller: ControllerConfig::default(),
        anchors,
        thrusters: scaled_default_thrusters(0.2),
    }
}

/// Pure rotation on a turntable with the tag mounted 7.07 cm off the center
/// of rotation; exercises the lever-arm kinematic coupling.
pub fn turntable() -> ScenarioConfig {
    ScenarioConfig {
        name: "turntable".into(),
        mode: Mode::TurntableOpenLoop,
        duration: 40.0,
        dt: 0.01,
        seed: 3,
        uwb_every: 10,
        sample_initial_mean: true,
        tag_arm: Vec3::new(0.0707, 0.0, 0.0),
        imu_arm: Vec3::zeros(),
        filter_tag_arm: None,
        truth: TruthInit {
            position: Vec3::zeros(),
            velocity: Vec3::zeros(),
            attitude: Quaternion::identity(),
            rate: Vec3::new(0.0, 0.0, std::f64::consts::PI / 5.0),
        },
        mass: MassConfig { mass: 1.0, inertia_diag: Vec3::new(0.0017, 0.0017, 0.0017) },
        gyro: GyroModel {
            sigma_rate: 0.0035,
            sigma_bias_walk: 0.0,
            bias: Vec3::new(0.002, -0.001, 0.003),
        },
        accel: AccelModel { sigma: 0.02, bias: Vec3::zeros() },
        uwb: UwbModel::default(),
        filter: FilterConfig {
            p0_diag: [2.5e-3, 2.5e-3, 2.5e-3, 1e-4, 1e-4, 1e-4, 1e-6, 1e-6, 1e-6],
            ..base_filter_config()
        },
        setpoint: SetpointConfig {
            position: Vec3::zeros(),
            velocity: Vec3::zeros(),
            attitude: Quaternion::identity(),
            rate: Vec3::zeros(),
        },
        translation: None,
        controller: ControllerConfig::default(),
        anchors: square_anchors(2.0, 0.0, 0),
        thrusters: vec![],
    }
}

/// Names of the built-in presets, in listing order.
pub const PRESET_NAMES: [&str; 3] = ["translation_xy", "pose_acquisition", "turntable"];

/// Look up a preset by name.
pub fn preset(name: &str) -> Option<ScenarioConfig> {
    match name {
        "translation_xy" => Some(translation_xy()),
        "pose_acquisition" => Some(pose_acquisition()),
        "turntable" => Some(turntable()),
        _ => None,
    }
}

/// One-line description of each preset for the CLI listing.
pub fn preset_summary(name: &str) -> &'static str {
    match name {
        "translation_xy" => "open-loop constant-acceleration translation alternating +x/+y/-x/-y",
        "pose_acquisition" => "closed-loop combined translation and rotation to a commanded pose",
        "turntable" => "open-loop pure rotation with a 7.07 cm tag lever arm",
        _ => "",
    }
}
