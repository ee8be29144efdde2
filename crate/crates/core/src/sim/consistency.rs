//! Filter-consistency metrics: per-channel 3σ containment, NEES, and
//! rejection bookkeeping over one run or a Monte Carlo pool.

use nalgebra::SMatrix;

use crate::attitude::Vec3;
use crate::error::{Error, Result};
use crate::sim::RunLog;

/// Metrics that require ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct TruthMetrics {
    /// Fraction of epochs with |error| ≤ 3σ, per position axis.
    pub containment_pos: [f64; 3],
    /// Fraction of epochs with |error| ≤ 3σ, per velocity axis.
    pub containment_vel: [f64; 3],
    /// Fraction of epochs with |error| ≤ 3σ, per attitude-error axis.
    pub containment_att: [f64; 3],
    /// Mean NEES of the 3-DOF position block (≈ 3 for a consistent filter).
    pub mean_nees_pos: f64,
    /// Mean NEES of the 6-DOF position+velocity block (≈ 6 when consistent).
    pub mean_nees_posvel: f64,
    /// Final truth-vs-estimate position error (m).
    pub terminal_pos_error: f64,
    /// Final truth-vs-estimate attitude error (rad).
    pub terminal_att_error: f64,
}

/// Consistency summary of one run (or a pooled batch).
#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyReport {
    pub epochs: usize,
    pub range_count: usize,
    pub rejected_count: usize,
    pub rejected_fraction: f64,
    pub injected_outliers: usize,
    /// `None` when the log carries no ground truth (hardware replay).
    pub truth: Option<TruthMetrics>,
}

/// Truth-vs-estimate errors of one epoch in the filter's error coordinates.
pub(crate) fn epoch_errors(e: &crate::sim::Epoch) -> Option<(Vec3, Vec3, Vec3)> {
    let truth = e.truth.as_ref()?;
    let d_pos = truth.position - e.est_position;
    let d_vel = truth.velocity - e.est_velocity;
    // right-multiplicative attitude error: q_true = q̂ ⊗ δq
    let dq = e.est_attitude.conjugate().mul_unchecked(&truth.attitude);
    Some((d_pos, d_vel, dq.rotation_vector()))
}

/// Evaluate containment, NEES, and rejection statistics for one run.
///
/// Errors if the log carries no ground truth.
pub fn consistency_check(log: &RunLog) -> Result<ConsistencyReport> {
    if log.epochs.is_empty() {
        return Err(Error::Configuration("run log is empty".into()));
    }
    if log.epochs.iter().any(|e| e.truth.is_none()) {
        return Err(Error::Configuration("consistency check requires ground truth".into()));
    }

    let n = log.epochs.len();
    let mut contained = [[0usize; 3]; 3];
    let mut nees_pos_sum = 0.0;
    let mut nees_posvel_sum = 0.0;

    for e in &log.epochs {
        let (d_pos, d_vel, d_att) = epoch_errors(e).expect("truth checked above");
        for i in 0..3 {
            if d_pos[i].abs() <= 3.0 * e.cov[(i, i)].sqrt() {
                contained[0][i] += 1;
            }
            if d_vel[i].abs() <= 3.0 * e.cov[(3 + i, 3 + i)].sqrt() {
                contained[1][i] += 1;
            }
            if d_att[i].abs() <= 3.0 * e.cov[(6 + i, 6 + i)].sqrt() {
                contained[2][i] += 1;
            }
        }

        let p_pos = e.cov.fixed_view::<3, 3>(0, 0).clone_owned();
        if let Some(inv) = p_pos.try_inverse() {
            nees_pos_sum += (d_pos.transpose() * inv * d_pos)[(0, 0)];
        }
        let p_pv = e.cov.fixed_view::<6, 6>(0, 0).clone_owned();
        if let Some(inv) = p_pv.try_inverse() {
            let mut err6 = SMatrix::<f64, 6, 1>::zeros();
            for i in 0..3 {
                err6[i] = d_pos[i];
                err6[3 + i] = d_vel[i];
            }
            nees_posvel_sum += (err6.transpose() * inv * err6)[(0, 0)];
        }
    }

    let frac = |c: usize| c as f64 / n as f64;
    let last = log.epochs.last().expect("non-empty");
    let (d_pos, _, d_att) = epoch_errors(last).expect("truth checked above");

    let range_count = log.range_events().count();
    let rejected_count = log.range_events().filter(|r| !r.accepted).count();

    Ok(ConsistencyReport {
        epochs: n,
        range_count,
        rejected_count,
        rejected_fraction: if range_count > 0 { rejected_count as f64 / range_count as f64 } else { 0.0 },
        injected_outliers: log.injected_outliers,
        truth: Some(TruthMetrics {
            containment_pos: [frac(contained[0][0]), frac(contained[0][1]), frac(contained[0][2])],
            containment_vel: [frac(contained[1][0]), frac(contained[1][1]), frac(contained[1][2])],
            containment_att: [frac(contained[2][0]), frac(contained[2][1]), frac(contained[2][2])],
            mean_nees_pos: nees_pos_sum / n as f64,
            mean_nees_posvel: nees_posvel_sum / n as f64,
            terminal_pos_error: d_pos.norm(),
            terminal_att_error: d_att.norm(),
        }),
    })
}

/// Summary for truth-free logs: measurement bookkeeping only, truth metrics
/// marked unavailable.
pub fn measurement_only_report(log: &RunLog) -> ConsistencyReport {
    let range_count = log.range_events().count();
    let rejected_count = log.range_events().filter(|r| !r.accepted).count();
    ConsistencyReport {
        epochs: log.epochs.len(),
        range_count,
        rejected_count,
        rejected_fraction: if range_count > 0 { rejected_count as f64 / range_count as f64 } else { 0.0 },
        injected_outliers: log.injected_outliers,
        truth: None,
    }
}

/// Pool per-run reports into one (equal-weight epochs across runs).
pub(crate) fn pool(reports: &[ConsistencyReport]) -> Result<ConsistencyReport> {
    if reports.is_empty() {
        return Err(Error::Configuration("nothing to pool".into()));
    }
    let total_epochs: usize = reports.iter().map(|r| r.epochs).sum();
    let range_count: usize = reports.iter().map(|r| r.range_count).sum();
    let rejected_count: usize = reports.iter().map(|r| r.rejected_count).sum();
    let injected: usize = reports.iter().map(|r| r.injected_outliers).sum();

    let truth = if reports.iter().all(|r| r.truth.is_some()) {
        let mut pos = [0.0; 3];
        let mut vel = [0.0; 3];
        let mut att = [0.0; 3];
        let mut nees_pos = 0.0;
        let mut nees_pv = 0.0;
        let mut term_pos = 0.0;
        let mut term_att = 0.0;
        for r in reports {
            let t = r.truth.as_ref().expect("checked");
            let w = r.epochs as f64 / total_epochs as f64;
            for i in 0..3 {
                pos[i] += t.containment_pos[i] * w;
                vel[i] += t.containment_vel[i] * w;
                att[i] += t.containment_att[i] * w;
            }
            nees_pos += t.mean_nees_pos * w;
            nees_pv += t.mean_nees_posvel * w;
            term_pos += t.terminal_pos_error / reports.len() as f64;
            term_att += t.terminal_att_error / reports.len() as f64;
        }
        Some(TruthMetrics {
            containment_pos: pos,
            containment_vel: vel,
            containment_att: att,
            mean_nees_pos: nees_pos,
            mean_nees_posvel: nees_pv,
            terminal_pos_error: term_pos,
            terminal_att_error: term_att,
        })
    } else {
        None
    };

    Ok(ConsistencyReport {
        epochs: total_epochs,
        range_count,
        rejected_count,
        rejected_fraction: if range_count > 0 { rejected_count as f64 / range_count as f64 } else { 0.0 },
        injected_outliers: injected,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attitude::Quaternion;
    use crate::eskf::Cov9;
    use crate::rigid_body::RigidBodyState;
    use crate::sim::{Epoch, RangeEvent};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn epoch_with_error(t: f64, pos_err: Vec3, sigma: f64) -> Epoch {
        let truth = RigidBodyState::at_rest(pos_err);
        let mut cov = Cov9::zeros();
        for i in 0..9 {
            cov[(i, i)] = sigma * sigma;
        }
        Epoch {
            t,
            truth: Some(truth),
            est_position: Vec3::zeros(),
            est_velocity: Vec3::zeros(),
            est_attitude: Quaternion::identity(),
            cov,
            gyro: Vec3::zeros(),
            specific_force: Vec3::zeros(),
            range: None,
            thrust: vec![],
        }
    }

    fn log_of(epochs: Vec<Epoch>) -> RunLog {
        RunLog { name: "test".into(), seed: 0, dt: 0.01, epochs, injected_outliers: 0, stale_ranges: 0 }
    }

    #[test]
    fn zero_errors_give_full_containment() {
        let log = log_of((0..100).map(|k| epoch_with_error(k as f64 * 0.01, Vec3::zeros(), 0.1)).collect());
        let rep = consistency_check(&log).unwrap();
        let t = rep.truth.unwrap();
        assert_eq!(t.containment_pos, [1.0; 3]);
        assert_eq!(t.containment_vel, [1.0; 3]);
        assert_eq!(t.containment_att, [1.0; 3]);
        assert_eq!(t.mean_nees_pos, 0.0);
    }

    #[test]
    fn counts_violations_exactly() {
        // 10 of 100 epochs sit outside 3σ on the x position channel
        let epochs: Vec<Epoch> = (0..100)
            .map(|k| {
                let err = if k < 10 { Vec3::new(0.5, 0.0, 0.0) } else { Vec3::zeros() };
                epoch_with_error(k as f64 * 0.01, err, 0.1)
            })
            .collect();
        let rep = consistency_check(&log_of(epochs)).unwrap();
        let t = rep.truth.unwrap();
        assert!((t.containment_pos[0] - 0.90).abs() < 1e-12);
        assert_eq!(t.containment_pos[1], 1.0);
    }

    #[test]
    fn truth_free_log_is_rejected_by_check_but_summarized() {
        let mut e = epoch_with_error(0.0, Vec3::zeros(), 0.1);
        e.truth = None;
        e.range = Some(RangeEvent {
            anchor_id: 0,
            measured: 1.0,
            expected: 1.0,
            innovation: 0.0,
            innovation_variance: 1e-4,
            accepted: true,
            injected_outlier: false,
            skipped: false,
        });
        let log = log_of(vec![e]);
        assert!(consistency_check(&log).is_err());
        let rep = measurement_only_report(&log);
        assert!(rep.truth.is_none());
        assert_eq!(rep.range_count, 1);
        assert_eq!(rep.rejected_count, 0);
    }

    /// Independent scalar Kalman filter used as a NEES oracle: an exactly
    /// linear-Gaussian problem must average NEES ≈ state dimension.
    #[test]
    fn scalar_kalman_reference_nees() {
        let q: f64 = 1e-4;
        let r: f64 = 1e-2;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let runs = 100;
        let steps = 200;
        let mut all_epochs: Vec<Epoch> = Vec::new();
        let mut oracle_nees_sum = 0.0;
        let mut oracle_count = 0usize;

        for _ in 0..runs {
            let mut x_true = 0.0f64;
            let mut x_hat = 0.0f64;
            let mut p: f64 = 1e-2;
            // the filter mean starts offset by a draw consistent with p
            x_hat += p.sqrt() * rng.sample::<f64, _>(StandardNormal);
            for k in 0..steps {
                // truth random walk, then measurement update
                x_true += q.sqrt() * rng.sample::<f64, _>(StandardNormal);
                p += q;
                let z = x_true + r.sqrt() * rng.sample::<f64, _>(StandardNormal);
                let s = p + r;
                let gain = p / s;
                x_hat += gain * (z - x_hat);
                p *= 1.0 - gain;

                let err = x_true - x_hat;
                oracle_nees_sum += err * err / p;
                oracle_count += 1;

                // embed the scalar channel in the 9-state log format with
                // unit-covariance zero-error padding elsewhere
                let mut cov = Cov9::identity();
                cov[(0, 0)] = p;
                let truth = RigidBodyState::at_rest(Vec3::new(x_true, 0.0, 0.0));
                all_epochs.push(Epoch {
                    t: k as f64,
                    truth: Some(truth),
                    est_position: Vec3::new(x_hat, 0.0, 0.0),
                    est_velocity: Vec3::zeros(),
                    est_attitude: Quaternion::identity(),
                    cov,
                    gyro: Vec3::zeros(),
                    specific_force: Vec3::zeros(),
                    range: None,
                    thrust: vec![],
                });
            }
        }

        let oracle_mean = oracle_nees_sum / oracle_count as f64;
        assert!((oracle_mean - 1.0).abs() < 0.15, "oracle mean NEES {oracle_mean}");

        // the report's 3-DOF position NEES sees one live channel + two exact
        // zeros, so it must match the scalar oracle
        let rep = consistency_check(&log_of(all_epochs)).unwrap();
        let got = rep.truth.unwrap().mean_nees_pos;
        assert!((got - oracle_mean).abs() < 1e-9, "report {got} vs oracle {oracle_mean}");
    }

    #[test]
    fn pooling_averages_by_epoch_weight() {
        let a = consistency_check(&log_of(
            (0..50).map(|k| epoch_with_error(k as f64, Vec3::zeros(), 0.1)).collect(),
        ))
        .unwrap();
        let b = consistency_check(&log_of(
            (0..50)
                .map(|k| epoch_with_error(k as f64, Vec3::new(0.5, 0.0, 0.0), 0.1))
                .collect(),
        ))
        .unwrap();
        let pooled = pool(&[a, b]).unwrap();
        let t = pooled.truth.unwrap();
        assert!((t.containment_pos[0] - 0.5).abs() < 1e-12);
        assert_eq!(pooled.epochs, 100);
    }
}
