// scratch calibration probe, not part of the deliverable
use proxnav::sim::{monte_carlo, pose_acquisition};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let q_vel: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(4e-4);
    let q_att: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(5e-4);
    let q_pos: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1e-8);
    let runs: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(50);
    let seed0: u64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(100);

    let mut cfg = pose_acquisition();
    for i in 0..3 {
        cfg.filter.q_diag[i] = q_pos;
        cfg.filter.q_diag[3 + i] = q_vel;
        cfg.filter.q_diag[6 + i] = q_att;
    }
    let t0 = Instant::now();
    let mc = monte_carlo(&cfg, runs, seed0).unwrap();
    let wall = t0.elapsed().as_secs_f64();
    let t = mc.pooled.truth.as_ref().unwrap();
    println!(
        "q_pos={q_pos:.1e} q_vel={q_vel:.1e} q_att={q_att:.1e} runs={runs} wall={wall:.1}s"
    );
    println!(
        "  containment pos [{:.3} {:.3} {:.3}] vel [{:.3} {:.3} {:.3}] att [{:.3} {:.3} {:.3}]",
        t.containment_pos[0], t.containment_pos[1], t.containment_pos[2],
        t.containment_vel[0], t.containment_vel[1], t.containment_vel[2],
        t.containment_att[0], t.containment_att[1], t.containment_att[2]
    );
    println!(
        "  nees_pos={:.2} nees_posvel={:.2} rejected={:.3} terminal_pos={:.4}±{:.4} terminal_att={:.2}±{:.2}deg",
        t.mean_nees_pos,
        t.mean_nees_posvel,
        mc.pooled.rejected_fraction,
        mc.terminal_pos_error_mean,
        mc.terminal_pos_error_std,
        mc.terminal_att_error_mean.to_degrees(),
        mc.terminal_att_error_std.to_degrees()
    );
    let over5: Vec<f64> = mc
        .per_run
        .iter()
        .filter_map(|r| r.truth.as_ref())
        .filter(|t| t.terminal_att_error.to_degrees() > 5.0)
        .map(|t| t.terminal_pos_error)
        .collect();
    println!(
        "  runs with terminal att > 5 deg: {} of {}, worst terminal pos among them {:.4}",
        over5.len(),
        runs,
        over5.iter().cloned().fold(0.0, f64::max)
    );
    for (i, r) in mc.per_run.iter().enumerate() {
        let t = r.truth.as_ref().unwrap();
        if t.mean_nees_pos > 10.0 || t.terminal_pos_error > 0.1 {
            println!(
                "  BAD seed {}: nees_pos={:.1} terminal_pos={:.3} rejected={:.3} cont_pos=[{:.2} {:.2} {:.2}]",
                seed0 + i as u64,
                t.mean_nees_pos,
                t.terminal_pos_error,
                r.rejected_fraction,
                t.containment_pos[0],
                t.containment_pos[1],
                t.containment_pos[2]
            );
        }
    }
}
