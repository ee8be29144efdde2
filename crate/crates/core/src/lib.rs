//! Relative pose estimation and closed-loop control for a thrust-capable
//! deputy module operating near a chief platform.
//!
//! The crate provides, as a library and through the `proxnav` CLI:
//!
//! - quaternion/rotation algebra ([`attitude`]),
//! - truth-side 6-DOF rigid-body dynamics with lever-arm kinematic coupling
//!   ([`rigid_body`]),
//! - gyro / accelerometer / UWB range measurement synthesis ([`sensors`]),
//! - an error-state extended Kalman filter with Mahalanobis range gating and
//!   multiplicative attitude reset ([`eskf`]),
//! - LQR position/attitude control with constrained thrust allocation onto a
//!   ten-thruster layout ([`control`]),
//! - scenario orchestration, Monte Carlo batches, and filter-consistency
//!   reporting ([`sim`]),
//! - config files, sensor-log parsing/replay, and CSV emission ([`io`]).

pub mod attitude;
pub mod control;
pub mod error;
pub mod eskf;
pub mod io;
pub mod rigid_body;
pub mod sensors;
pub mod sim;

pub use attitude::{Mat3, Quaternion, Vec3};
pub use error::{Error, Result};
