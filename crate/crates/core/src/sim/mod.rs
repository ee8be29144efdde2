//! Scenario orchestration: simultaneous truth propagation and estimation,
//! synthetic measurement generation, closed-loop control, and Monte Carlo
//! batches.
//!
//! Per epoch the loop (1) samples the gyro from truth, (2) on range epochs
//! picks one anchor uniformly, synthesizes a range with the outlier mixture,
//! and runs the filter update + reset, (3) computes the thrust command from
//! the *estimate*, and (4) propagates truth and estimate with that same
//! command from their respective states.

pub mod consistency;
mod scenario;

pub use consistency::{consistency_check, ConsistencyReport, TruthMetrics};
pub use scenario::{
    preset, preset_summary, pose_acquisition, translation_xy, turntable, ControllerConfig,
    FilterConfig, MassConfig, Mode, ScenarioConfig, SetpointConfig, TranslationProgram, TruthInit,
    PRESET_NAMES,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::attitude::{Quaternion, Vec3};
use crate::control::{allocate, compute_control, design_pose_regulator, los_guidance, to_body_frame, Setpoint};
use crate::error::{Error, Result};
use crate::eskf::{Cov9, FilterState, PoseVelocity, RangeUpdate};
use crate::rigid_body::{step, RigidBodyState, Wrench};
use crate::sensors::{gyro_measure, pick_anchor, uwb_measure};

/// One range measurement as seen by the filter, with its gate decision.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RangeEvent {
    pub anchor_id: u32,
    pub measured: f64,
    pub expected: f64,
    pub innovation: f64,
    pub innovation_variance: f64,
    pub accepted: bool,
    /// The generator drew this sample from the outlier branch.
    pub injected_outlier: bool,
    /// Geometry was degenerate and the update was skipped entirely.
    pub skipped: bool,
}

/// Per-epoch record: truth (when known), post-update estimate, covariance,
/// filter inputs, the range event if any, and the thrust command.
#[derive(Clone, Debug, PartialEq)]
pub struct Epoch {
    pub t: f64,
    pub truth: Option<RigidBodyState>,
    pub est_position: Vec3,
    pub est_velocity: Vec3,
    pub est_attitude: Quaternion,
    pub cov: Cov9,
    /// Gyro sample consumed by the prediction out of this epoch.
    pub gyro: Vec3,
    /// Body-frame specific force consumed by the prediction out of this epoch.
    pub specific_force: Vec3,
    pub range: Option<RangeEvent>,
    /// Individual thruster magnitudes (empty in open-loop modes).
    pub thrust: Vec<f64>,
}

/// Full time history of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunLog {
    pub name: String,
    pub seed: u64,
    pub dt: f64,
    pub epochs: Vec<Epoch>,
    /// Outliers injected by the range generator (truth-side bookkeeping).
    pub injected_outliers: usize,
    /// Range records dropped for arriving too old (replay only).
    pub stale_ranges: usize,
}

impl RunLog {
    pub fn range_events(&self) -> impl Iterator<Item = &RangeEvent> {
        self.epochs.iter().filter_map(|e| e.range.as_ref())
    }
}

/// Random streams of one run, all derived from the scenario seed.
struct Streams {
    init: ChaCha8Rng,
    gyro: ChaCha8Rng,
    uwb: ChaCha8Rng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let make = |stream: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            rng
        };
        Self { init: make(0), gyro: make(1), uwb: make(2) }
    }
}

fn init_filter(cfg: &ScenarioConfig, streams: &mut Streams) -> Result<FilterState> {
    let truth = cfg.initial_truth();
    let mean = PoseVelocity {
        position: truth.position,
        velocity: truth.velocity,
        attitude: truth.attitude,
    };
    let mut p0 = Cov9::zeros();
    for (i, p) in cfg.filter.p0_diag.iter().enumerate() {
        p0[(i, i)] = *p;
    }
    let bias_estimate = cfg.gyro.bias + cfg.filter.gyro_bias_error;
    let rng = if cfg.sample_initial_mean { Some(&mut streams.init) } else { None };
    FilterState::init(&mean, &p0, bias_estimate, rng)
}

fn translation_force(cfg: &ScenarioConfig, t: f64) -> Vec3 {
    let program = cfg.translation.expect("validated translation program");
    let phase = ((t / program.phase_duration).floor() as i64).rem_euclid(4);
    let dir = match phase {
        0 => Vec3::x(),
        1 => Vec3::y(),
        2 => -Vec3::x(),
        _ => -Vec3::y(),
    };
    dir * (cfg.mass.mass * program.accel)
}

/// Attitude/velocity setpoint override from line-of-sight guidance.
fn los_setpoint(cfg: &ScenarioConfig, base: &Setpoint, filter: &FilterState) -> Setpoint {
    let mut sp = *base;
    let los = base.position - filter.position;
    let dist = Vec3::new(los.x, los.y, 0.0).norm();
    if dist <= cfg.controller.los_freeze_radius {
        return sp;
    }
    let (heading, speed) = los_guidance(
        &filter.position,
        &filter.attitude,
        &base.position,
        cfg.controller.los_gain,
        cfg.controller.los_speed_limit,
    );
    sp.attitude = Quaternion::from_axis_angle(&Vec3::z(), heading).mul_unchecked(&filter.attitude);
    sp.velocity = Vec3::new(los.x, los.y, 0.0) * (speed / dist);
    sp
}

fn run_scenario(cfg: &ScenarioConfig) -> Result<RunLog> {
    cfg.validate()?;
    let mp = cfg.mass_properties()?;
    let anchors = cfg.anchor_set()?;
    let filter_arm = cfg.filter_arm()?;
    let nc = cfg.noise_config();
    let gate = cfg.gate_config();

    let controller = match cfg.mode {
        Mode::ClosedLoop => {
            let gains = design_pose_regulator(&cfg.controller.weights, &mp)?;
            let thrusters = cfg.thruster_config()?;
            Some((gains, thrusters))
        }
        _ => None,
    };

    let mut streams = Streams::new(cfg.seed);
    let mut truth = cfg.initial_truth();
    let mut filter = init_filter(cfg, &mut streams)?;
    let base_setpoint: Setpoint = cfg.setpoint.into();
    let truth_tag_arm = crate::rigid_body::LeverArm::new(cfg.tag_arm)?;

    let n = cfg.n_epochs();
    let mut epochs = Vec::with_capacity(n);
    let mut injected_outliers = 0usize;

    for k in 0..n {
        let t = k as f64 * cfg.dt;
        let gyro = gyro_measure(&truth.rate, &cfg.gyro, &mut streams.gyro);

        let range = if k as u32 % cfg.uwb_every == 0 {
            let anchor = pick_anchor(&anchors, &mut streams.uwb)?;
            let tag_pos = truth.position + truth.attitude.rotate(&truth_tag_arm.vector());
            let meas = uwb_measure(t, &tag_pos, anchor, &cfg.uwb, &mut streams.uwb)?;
            if meas.outlier {
                injected_outliers += 1;
            }
            let event = match filter.update(&meas, anchor, &filter_arm, &nc, &gate) {
                Ok(RangeUpdate { accepted, expected, innovation, innovation_variance }) => {
                    filter.reset();
                    RangeEvent {
                        anchor_id: anchor.id,
                        measured: meas.range,
                        expected,
                        innovation,
                        innovation_variance,
                        accepted,
                        injected_outlier: meas.outlier,
                        skipped: false,
                    }
                }
                Err(Error::DegenerateGeometry(_)) => RangeEvent {
                    anchor_id: anchor.id,
                    measured: meas.range,
                    expected: f64::NAN,
                    innovation: f64::NAN,
                    innovation_variance: f64::NAN,
                    accepted: false,
                    injected_outlier: meas.outlier,
                    skipped: true,
                },
                Err(e) => return Err(e),
            };
            Some(event)
        } else {
            None
        };

        let (force_body, torque_body, thrust) = match cfg.mode {
            Mode::ClosedLoop => {
                let (gains, thrusters) = controller.as_ref().expect("closed-loop controller");
                let sp = if cfg.controller.los_attitude {
                    los_setpoint(cfg, &base_setpoint, &filter)
                } else {
                    base_setpoint
                };
                let cmd = compute_control(&filter, &sp, gains, &cfg.controller.limits);
                let f_body = to_body_frame(&cmd.force_chief, &filter.attitude);
                let alloc = allocate(&f_body, &cmd.torque_body, thrusters)?;
                let (force, torque) = thrusters.wrench_of(&alloc.thrust);
                (force, torque, alloc.thrust)
            }
            Mode::TranslationOnly => (translation_force(cfg, t), Vec3::zeros(), Vec::new()),
            Mode::TurntableOpenLoop => (Vec3::zeros(), Vec3::zeros(), Vec::new()),
        };
        let specific_force = force_body / cfg.mass.mass;

        epochs.push(Epoch {
            t,
            truth: Some(truth),
            est_position: filter.position,
            est_velocity: filter.velocity,
            est_attitude: filter.attitude,
            cov: filter.cov,
            gyro,
            specific_force,
            range,
            thrust,
        });

        if k + 1 < n {
            let t_next = (k + 1) as f64 * cfg.dt;
            let dt = t_next - t;
            truth = step(&truth, &Wrench { force: force_body, torque: torque_body }, &mp, dt);
            filter.predict_specific_force(&gyro, &specific_force, dt, &nc);
        }
    }

    Ok(RunLog {
        name: cfg.name.clone(),
        seed: cfg.seed,
        dt: cfg.dt,
        epochs,
        injected_outliers,
        stale_ranges: 0,
    })
}

/// Run a closed-loop capture scenario (Fig.-6-style parallel propagation).
pub fn run_closed_loop(cfg: &ScenarioConfig) -> Result<RunLog> {
    if cfg.mode != Mode::ClosedLoop {
        return Err(Error::Configuration("run_closed_loop requires mode = closed_loop".into()));
    }
    run_scenario(cfg)
}

/// Run a turntable pure-rotation scenario with the filter open loop.
pub fn run_turntable(cfg: &ScenarioConfig) -> Result<RunLog> {
    if cfg.mode != Mode::TurntableOpenLoop {
        return Err(Error::Configuration("run_turntable requires mode = turntable_open_loop".into()));
    }
    run_scenario(cfg)
}

/// Run any scenario according to its mode.
pub fn run(cfg: &ScenarioConfig) -> Result<RunLog> {
    run_scenario(cfg)
}

/// Aggregate of a Monte Carlo batch.
#[derive(Clone, Debug)]
pub struct MonteCarloReport {
    pub n_runs: usize,
    /// Report over all runs pooled epoch by epoch.
    pub pooled: ConsistencyReport,
    pub per_run: Vec<ConsistencyReport>,
    pub terminal_pos_error_mean: f64,
    pub terminal_pos_error_std: f64,
    pub terminal_att_error_mean: f64,
    pub terminal_att_error_std: f64,
}

/// Independent seeded runs `seed0, seed0+1, ...` aggregated into one report.
pub fn monte_carlo(cfg: &ScenarioConfig, n_runs: usize, seed0: u64) -> Result<MonteCarloReport> {
    if n_runs == 0 {
        return Err(Error::Configuration("monte_carlo needs n_runs >= 1".into()));
    }
    let seeds: Vec<u64> = (0..n_runs).map(|i| seed0.wrapping_add(i as u64)).collect();
    monte_carlo_with_seeds(cfg, &seeds)
}

/// Monte Carlo over an explicit seed list (runs in parallel, aggregation is
/// ordered by run index and therefore deterministic).
pub fn monte_carlo_with_seeds(cfg: &ScenarioConfig, seeds: &[u64]) -> Result<MonteCarloReport> {
    let reports: Result<Vec<ConsistencyReport>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut run_cfg = cfg.clone();
            run_cfg.seed = seed;
            let log = run_scenario(&run_cfg)?;
            consistency_check(&log)
        })
        .collect();
    let per_run = reports?;
    let pooled = consistency::pool(&per_run)?;

    let terminals: Vec<(f64, f64)> = per_run
        .iter()
        .map(|r| {
            let t = r.truth.as_ref().expect("simulated runs carry truth");
            (t.terminal_pos_error, t.terminal_att_error)
        })
        .collect();
    let mean = |vals: &[f64]| vals.iter().sum::<f64>() / vals.len() as f64;
    let std = |vals: &[f64], m: f64| {
        (vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / vals.len() as f64).sqrt()
    };
    let pos: Vec<f64> = terminals.iter().map(|t| t.0).collect();
    let att: Vec<f64> = terminals.iter().map(|t| t.1).collect();
    let (pm, am) = (mean(&pos), mean(&att));

    Ok(MonteCarloReport {
        n_runs: seeds.len(),
        pooled,
        per_run,
        terminal_pos_error_mean: pm,
        terminal_pos_error_std: std(&pos, pm),
        terminal_att_error_mean: am,
        terminal_att_error_std: std(&att, am),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn same_seed_reproduces_bitwise() {
        let cfg = pose_acquisition();
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a, b);

        let mut other = cfg.clone();
        other.seed += 1;
        assert_ne!(run(&other).unwrap(), a);
    }

    #[test]
    fn mode_guards() {
        assert!(run_closed_loop(&turntable()).is_err());
        assert!(run_turntable(&pose_acquisition()).is_err());
    }

    #[test]
    fn zero_noise_exact_init_tracks_truth() {
        let mut cfg = pose_acquisition();
        cfg.sample_initial_mean = false;
        cfg.gyro.sigma_rate = 0.0;
        cfg.gyro.bias = Vec3::zeros();
        cfg.filter.gyro_bias_error = Vec3::zeros();
        cfg.uwb.sigma_range = 0.0;
        cfg.uwb.outlier_fraction = 0.0;
        cfg.uwb.sigma_outlier = 0.0;
        let log = run(&cfg).unwrap();
        let last = log.epochs.last().unwrap();
        let truth = last.truth.unwrap();
        let err = (truth.position - last.est_position).norm();
        assert!(err < 1e-6, "terminal truth-estimate gap {err}");
    }

    #[test]
    fn closed_loop_reaches_setpoint_neighborhood() {
        let cfg = pose_acquisition();
        let log = run(&cfg).unwrap();
        let last = log.epochs.last().unwrap();
        let truth = last.truth.unwrap();
        let gap = (truth.position - cfg.setpoint.position).norm();
        assert!(gap < 0.1, "terminal distance to setpoint {gap}");
    }

    #[test]
    fn turntable_truth_is_pure_rotation() {
        let cfg = turntable();
        let log = run_turntable(&cfg).unwrap();
        for e in &log.epochs {
            let truth = e.truth.unwrap();
            assert_abs_diff_eq!((truth.position - cfg.truth.position).norm(), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!((truth.rate - cfg.truth.rate).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn turntable_range_envelope_matches_law_of_cosines() {
        let mut cfg = turntable();
        cfg.uwb.sigma_range = 0.0;
        cfg.uwb.outlier_fraction = 0.0;
        cfg.uwb.sigma_outlier = 0.0;
        let log = run_turntable(&cfg).unwrap();
        let arm = cfg.tag_arm.norm();
        let anchors = cfg.anchor_set().unwrap();
        let mut seen: std::collections::HashMap<u32, (f64, f64)> = Default::default();
        for e in &log.epochs {
            if let Some(r) = &e.range {
                let d = (anchors.get(r.anchor_id).unwrap().position - cfg.truth.position).norm();
                assert!(
                    r.measured >= d - arm - 1e-9 && r.measured <= d + arm + 1e-9,
                    "range {} outside envelope [{}, {}]",
                    r.measured,
                    d - arm,
                    d + arm
                );
                let entry = seen.entry(r.anchor_id).or_insert((f64::INFINITY, f64::NEG_INFINITY));
                entry.0 = entry.0.min(r.measured);
                entry.1 = entry.1.max(r.measured);
            }
        }
        // every anchor is sampled near both envelope extremes over 4 revolutions
        for (id, (lo, hi)) in seen {
            let d = (anchors.get(id).unwrap().position - cfg.truth.position).norm();
            assert!(lo < d - arm + 1e-3, "anchor {id} min {lo} vs {}", d - arm);
            assert!(hi > d + arm - 1e-3, "anchor {id} max {hi} vs {}", d + arm);
        }
    }

    #[test]
    fn truth_trajectory_independent_of_filter_in_open_loop() {
        let cfg = turntable();
        let mut degraded = cfg.clone();
        degraded.filter.q_diag = [1e-2; 9];
        degraded.filter.r_range = 1.0;
        let a = run(&cfg).unwrap();
        let b = run(&degraded).unwrap();
        for (ea, eb) in a.epochs.iter().zip(&b.epochs) {
            assert_eq!(ea.truth, eb.truth);
        }
    }

    #[test]
    fn outlier_bookkeeping_is_consistent() {
        let cfg = pose_acquisition();
        let log = run(&cfg).unwrap();
        let from_events = log.range_events().filter(|r| r.injected_outlier).count();
        assert_eq!(from_events, log.injected_outliers);
        assert!(log.injected_outliers > 0);
    }

    #[test]
    fn monte_carlo_single_run_matches_direct_run() {
        let mut cfg = translation_xy();
        cfg.duration = 5.0;
        let mc = monte_carlo(&cfg, 1, cfg.seed).unwrap();
        let direct = consistency_check(&run(&cfg).unwrap()).unwrap();
        assert_eq!(mc.n_runs, 1);
        assert_eq!(mc.per_run[0], direct);
        assert_eq!(mc.terminal_pos_error_std, 0.0);
    }

    #[test]
    fn monte_carlo_identical_seeds_have_zero_variance() {
        let mut cfg = translation_xy();
        cfg.duration = 3.0;
        let mc = monte_carlo_with_seeds(&cfg, &[11, 11, 11]).unwrap();
        assert_eq!(mc.terminal_pos_error_std, 0.0);
        assert_eq!(mc.terminal_att_error_std, 0.0);
        assert_eq!(mc.per_run[0], mc.per_run[1]);
    }

    #[test]
    fn los_attitude_steers_heading_toward_target() {
        let mut cfg = pose_acquisition();
        cfg.controller.los_attitude = true;
        cfg.duration = 20.0;
        let log = run(&cfg).unwrap();
        // midway through the approach the body +x axis should point at the target
        let e = &log.epochs[800];
        let truth = e.truth.unwrap();
        let los = cfg.setpoint.position - truth.position;
        if Vec3::new(los.x, los.y, 0.0).norm() > cfg.controller.los_freeze_radius {
            let fwd = truth.attitude.rotate(&Vec3::x());
            let cos = (fwd.x * los.x + fwd.y * los.y)
                / (Vec3::new(fwd.x, fwd.y, 0.0).norm() * Vec3::new(los.x, los.y, 0.0).norm());
            assert!(cos > 0.8, "heading misaligned, cos {cos}");
        }
    }
}
