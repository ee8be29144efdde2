// scratch diagnostic, not part of the deliverable
use proxnav::sim::{pose_acquisition, run};

fn main() {
    let cfg = pose_acquisition();
    let log = run(&cfg).unwrap();
    let mut accepted = 0usize;
    let mut total = 0usize;
    for (k, e) in log.epochs.iter().enumerate() {
        if let Some(r) = &e.range {
            total += 1;
            if r.accepted {
                accepted += 1;
            }
        }
        if k % 200 == 0 || k == log.epochs.len() - 1 {
            let truth = e.truth.unwrap();
            let err = (truth.position - e.est_position).norm();
            let verr = (truth.velocity - e.est_velocity).norm();
            let dq = proxnav::attitude::error_quat(&truth.attitude, &e.est_attitude);
            println!(
                "t={:6.2}  truth=({:7.3},{:7.3},{:7.3})  est_err={:8.5}  vel_err={:8.5}  att_err={:6.2}deg  sig_pos=({:.4},{:.4},{:.4})  acc={}/{}",
                e.t,
                truth.position.x,
                truth.position.y,
                truth.position.z,
                err,
                verr,
                dq_angle(&dq).to_degrees(),
                e.cov[(0, 0)].sqrt(),
                e.cov[(1, 1)].sqrt(),
                e.cov[(2, 2)].sqrt(),
                accepted,
                total
            );
        }
    }
}

fn dq_angle(q: &proxnav::Quaternion) -> f64 {
    q.angle()
}
