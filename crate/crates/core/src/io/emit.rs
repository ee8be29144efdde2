//! Result serialization: fixed-schema CSV files for plotting and analysis.
//!
//! `states.csv`  — truth and estimate per epoch
//! `errors.csv`  — per-channel estimation error and its 3σ bound
//! `ranges.csv`  — measured vs expected range with gate decisions
//! `report.csv`  — key/value consistency summary
//!
//! Truth-dependent columns are left empty when a log has no ground truth.
//! Emission is deterministic: identical inputs produce identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::sim::consistency::epoch_errors;
use crate::sim::{ConsistencyReport, MonteCarloReport, RunLog};

pub(crate) const STATES_HEADER: &str = "t,truth_px,truth_py,truth_pz,truth_vx,truth_vy,truth_vz,truth_qx,truth_qy,truth_qz,truth_qw,truth_wx,truth_wy,truth_wz,est_px,est_py,est_pz,est_vx,est_vy,est_vz,est_qx,est_qy,est_qz,est_qw";
pub(crate) const ERRORS_HEADER: &str = "t,err_px,sig3_px,err_py,sig3_py,err_pz,sig3_pz,err_vx,sig3_vx,err_vy,sig3_vy,err_vz,sig3_vz,err_ax,sig3_ax,err_ay,sig3_ay,err_az,sig3_az";
pub(crate) const RANGES_HEADER: &str = "t,anchor_id,measured,expected,innovation,innovation_variance,accepted,injected_outlier";

fn states_csv(log: &RunLog) -> String {
    let mut out = String::with_capacity(64 * log.epochs.len());
    out.push_str(STATES_HEADER);
    out.push('\n');
    for e in &log.epochs {
        write!(out, "{}", e.t).unwrap();
        match &e.truth {
            Some(s) => write!(
                out,
                ",{},{},{},{},{},{},{},{},{},{},{},{},{}",
                s.position.x,
                s.position.y,
                s.position.z,
                s.velocity.x,
                s.velocity.y,
                s.velocity.z,
                s.attitude.x,
                s.attitude.y,
                s.attitude.z,
                s.attitude.w,
                s.rate.x,
                s.rate.y,
                s.rate.z
            )
            .unwrap(),
            None => out.push_str(",,,,,,,,,,,,,"),
        }
        writeln!(
            out,
            ",{},{},{},{},{},{},{},{},{},{}",
            e.est_position.x,
            e.est_position.y,
            e.est_position.z,
            e.est_velocity.x,
            e.est_velocity.y,
            e.est_velocity.z,
            e.est_attitude.x,
            e.est_attitude.y,
            e.est_attitude.z,
            e.est_attitude.w
        )
        .unwrap();
    }
    out
}

fn errors_csv(log: &RunLog) -> String {
    let mut out = String::with_capacity(48 * log.epochs.len());
    out.push_str(ERRORS_HEADER);
    out.push('\n');
    for e in &log.epochs {
        write!(out, "{}", e.t).unwrap();
        let errors = epoch_errors(e);
        for i in 0..9 {
            let sig3 = 3.0 * e.cov[(i, i)].sqrt();
            match &errors {
                Some((dp, dv, da)) => {
                    let err = match i {
                        0..=2 => dp[i],
                        3..=5 => dv[i - 3],
                        _ => da[i - 6],
                    };
                    write!(out, ",{},{}", err, sig3).unwrap();
                }
                None => write!(out, ",,{}", sig3).unwrap(),
            }
        }
        out.push('\n');
    }
    out
}

fn ranges_csv(log: &RunLog) -> String {
    let mut out = String::new();
    out.push_str(RANGES_HEADER);
    out.push('\n');
    for e in &log.epochs {
        if let Some(r) = &e.range {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                e.t,
                r.anchor_id,
                r.measured,
                r.expected,
                r.innovation,
                r.innovation_variance,
                u8::from(r.accepted),
                u8::from(r.injected_outlier)
            )
            .unwrap();
        }
    }
    out
}

fn push_kv(out: &mut String, key: &str, value: impl std::fmt::Display) {
    writeln!(out, "{key},{value}").unwrap();
}

fn report_csv(report: &ConsistencyReport) -> String {
    let mut out = String::from("key,value\n");
    push_kv(&mut out, "epochs", report.epochs);
    push_kv(&mut out, "range_count", report.range_count);
    push_kv(&mut out, "rejected_count", report.rejected_count);
    push_kv(&mut out, "rejected_fraction", report.rejected_fraction);
    push_kv(&mut out, "injected_outliers", report.injected_outliers);
    match &report.truth {
        Some(t) => {
            for (i, axis) in ["x", "y", "z"].iter().enumerate() {
                push_kv(&mut out, &format!("containment_pos_{axis}"), t.containment_pos[i]);
            }
            for (i, axis) in ["x", "y", "z"].iter().enumerate() {
                push_kv(&mut out, &format!("containment_vel_{axis}"), t.containment_vel[i]);
            }
            for (i, axis) in ["x", "y", "z"].iter().enumerate() {
                push_kv(&mut out, &format!("containment_att_{axis}"), t.containment_att[i]);
            }
            push_kv(&mut out, "mean_nees_pos", t.mean_nees_pos);
            push_kv(&mut out, "mean_nees_posvel", t.mean_nees_posvel);
            push_kv(&mut out, "terminal_pos_error", t.terminal_pos_error);
            push_kv(&mut out, "terminal_att_error", t.terminal_att_error);
        }
        None => {
            for key in [
                "containment_pos_x",
                "containment_pos_y",
                "containment_pos_z",
                "containment_vel_x",
                "containment_vel_y",
                "containment_vel_z",
                "containment_att_x",
                "containment_att_y",
                "containment_att_z",
                "mean_nees_pos",
                "mean_nees_posvel",
                "terminal_pos_error",
                "terminal_att_error",
            ] {
                push_kv(&mut out, key, "unavailable");
            }
        }
    }
    out
}

/// Write the four result CSVs into `out_dir`, returning the paths written.
pub fn emit_results(log: &RunLog, report: &ConsistencyReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let files = [
        ("states.csv", states_csv(log)),
        ("errors.csv", errors_csv(log)),
        ("ranges.csv", ranges_csv(log)),
        ("report.csv", report_csv(report)),
    ];
    let mut written = Vec::new();
    for (name, text) in files {
        let path = out_dir.join(name);
        super::atomic_write(&path, text.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

/// Write a Monte Carlo aggregate: pooled `report.csv` plus per-run `runs.csv`.
pub fn write_mc_report(mc: &MonteCarloReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut report = report_csv(&mc.pooled);
    push_kv(&mut report, "n_runs", mc.n_runs);
    push_kv(&mut report, "terminal_pos_error_mean", mc.terminal_pos_error_mean);
    push_kv(&mut report, "terminal_pos_error_std", mc.terminal_pos_error_std);
    push_kv(&mut report, "terminal_att_error_mean", mc.terminal_att_error_mean);
    push_kv(&mut report, "terminal_att_error_std", mc.terminal_att_error_std);

    let mut runs = String::from(
        "run,rejected_fraction,mean_nees_pos,containment_pos_x,containment_pos_y,containment_pos_z,terminal_pos_error,terminal_att_error\n",
    );
    for (i, r) in mc.per_run.iter().enumerate() {
        match &r.truth {
            Some(t) => writeln!(
                runs,
                "{},{},{},{},{},{},{},{}",
                i,
                r.rejected_fraction,
                t.mean_nees_pos,
                t.containment_pos[0],
                t.containment_pos[1],
                t.containment_pos[2],
                t.terminal_pos_error,
                t.terminal_att_error
            )
            .unwrap(),
            None => writeln!(runs, "{},{},,,,,,", i, r.rejected_fraction).unwrap(),
        }
    }

    let mut written = Vec::new();
    for (name, text) in [("report.csv", report), ("runs.csv", runs)] {
        let path = out_dir.join(name);
        super::atomic_write(&path, text.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}
