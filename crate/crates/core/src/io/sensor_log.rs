//! Offline sensor-log format.
//!
//! Plain CSV, one record per line, `t,kind,...payload`:
//!
//! ```text
//! t,imu,gx,gy,gz,ax,ay,az
//! t,range,anchor_id,range_m,outlier01
//! t,truth,px,py,pz,vx,vy,vz,qx,qy,qz,qw,wx,wy,wz
//! ```
//!
//! Lines starting with `#` are comments. Timestamps must be non-decreasing
//! within each stream. Floats are written in shortest round-trip form, so
//! `parse(emit(x)) == x` holds bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::attitude::{Quaternion, Vec3};
use crate::error::{Error, Result};
use crate::rigid_body::RigidBodyState;
use crate::sensors::{ImuSample, RangeSample};
use crate::sim::RunLog;

/// Ground-truth pose record (motion-capture style).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruthRecord {
    pub t: f64,
    pub state: RigidBodyState,
}

/// Typed streams parsed from one sensor log.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SensorStreams {
    pub imu: Vec<ImuSample>,
    pub ranges: Vec<RangeSample>,
    pub truth: Vec<TruthRecord>,
}

impl SensorStreams {
    pub fn is_empty(&self) -> bool {
        self.imu.is_empty() && self.ranges.is_empty() && self.truth.is_empty()
    }
}

fn parse_f64(field: &str, line_no: usize) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::Parse {
        line: line_no,
        message: format!("expected a number, got {field:?}"),
    })
}

fn check_monotone(kind: &str, last: &mut Option<f64>, t: f64, line_no: usize) -> Result<()> {
    if let Some(prev) = *last {
        if t < prev {
            return Err(Error::Ordering {
                line: line_no,
                message: format!("{kind} timestamp {t} after {prev}"),
            });
        }
    }
    *last = Some(t);
    Ok(())
}

/// Parse a sensor log from text. See the module docs for the format.
pub fn parse_sensor_log_str(text: &str) -> Result<SensorStreams> {
    let mut streams = SensorStreams::default();
    let mut last = (None, None, None);
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 2 {
            return Err(Error::Parse { line: line_no, message: "expected `t,kind,...`".into() });
        }
        let t = parse_f64(fields[0], line_no)?;
        match fields[1].trim() {
            "imu" => {
                if fields.len() != 8 {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("imu record needs 8 fields, got {}", fields.len()),
                    });
                }
                check_monotone("imu", &mut last.0, t, line_no)?;
                let v: Result<Vec<f64>> =
                    fields[2..8].iter().map(|f| parse_f64(f, line_no)).collect();
                let v = v?;
                streams.imu.push(ImuSample {
                    t,
                    gyro: Vec3::new(v[0], v[1], v[2]),
                    accel: Vec3::new(v[3], v[4], v[5]),
                });
            }
            "range" => {
                if fields.len() != 5 {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("range record needs 5 fields, got {}", fields.len()),
                    });
                }
                check_monotone("range", &mut last.1, t, line_no)?;
                let anchor_id = fields[2].trim().parse::<u32>().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("bad anchor id {:?}", fields[2]),
                })?;
                let range = parse_f64(fields[3], line_no)?;
                if range < 0.0 {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("negative range {range}"),
                    });
                }
                let outlier = match fields[4].trim() {
                    "0" => false,
                    "1" => true,
                    other => {
                        return Err(Error::Parse {
                            line: line_no,
                            message: format!("outlier flag must be 0 or 1, got {other:?}"),
                        })
                    }
                };
                streams.ranges.push(RangeSample { t, anchor_id, range, outlier });
            }
            "truth" => {
                if fields.len() != 15 {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("truth record needs 15 fields, got {}", fields.len()),
                    });
                }
                check_monotone("truth", &mut last.2, t, line_no)?;
                let v: Result<Vec<f64>> =
                    fields[2..15].iter().map(|f| parse_f64(f, line_no)).collect();
                let v = v?;
                streams.truth.push(TruthRecord {
                    t,
                    state: RigidBodyState {
                        position: Vec3::new(v[0], v[1], v[2]),
                        velocity: Vec3::new(v[3], v[4], v[5]),
                        attitude: Quaternion::new(v[6], v[7], v[8], v[9]),
                        rate: Vec3::new(v[10], v[11], v[12]),
                    },
                });
            }
            other => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("unknown record kind {other:?}"),
                })
            }
        }
    }
    Ok(streams)
}

/// Parse a sensor log file.
pub fn parse_sensor_log(path: &Path) -> Result<SensorStreams> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Configuration(format!("cannot read sensor log {}: {e}", path.display())))?;
    parse_sensor_log_str(&text)
}

/// Render streams back to the log format (records interleaved by timestamp,
/// imu before range before truth at equal times).
pub fn sensor_log_to_string(streams: &SensorStreams) -> String {
    let mut out = String::new();
    let (mut i, mut r, mut t) = (0usize, 0usize, 0usize);
    let key = |t: f64, kind: u8| (t, kind);
    loop {
        let next_imu = streams.imu.get(i).map(|s| key(s.t, 0));
        let next_rng = streams.ranges.get(r).map(|s| key(s.t, 1));
        let next_tru = streams.truth.get(t).map(|s| key(s.t, 2));
        let candidates = [next_imu, next_rng, next_tru];
        let Some(best) = candidates.iter().flatten().min_by(|a, b| a.partial_cmp(b).unwrap())
        else {
            break;
        };
        match best.1 {
            0 => {
                let s = &streams.imu[i];
                writeln!(
                    out,
                    "{},imu,{},{},{},{},{},{}",
                    s.t, s.gyro.x, s.gyro.y, s.gyro.z, s.accel.x, s.accel.y, s.accel.z
                )
                .unwrap();
                i += 1;
            }
            1 => {
                let s = &streams.ranges[r];
                writeln!(
                    out,
                    "{},range,{},{},{}",
                    s.t,
                    s.anchor_id,
                    s.range,
                    if s.outlier { 1 } else { 0 }
                )
                .unwrap();
                r += 1;
            }
            _ => {
                let s = &streams.truth[t];
                let st = &s.state;
                writeln!(
                    out,
                    "{},truth,{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    s.t,
                    st.position.x,
                    st.position.y,
                    st.position.z,
                    st.velocity.x,
                    st.velocity.y,
                    st.velocity.z,
                    st.attitude.x,
                    st.attitude.y,
                    st.attitude.z,
                    st.attitude.w,
                    st.rate.x,
                    st.rate.y,
                    st.rate.z
                )
                .unwrap();
                t += 1;
            }
        }
    }
    out
}

/// Write streams to a sensor log file (atomic).
pub fn write_sensor_log(path: &Path, streams: &SensorStreams) -> Result<()> {
    super::atomic_write(path, sensor_log_to_string(streams).as_bytes())
}

/// Extract replayable streams from a simulation run: the gyro and specific
/// force the filter consumed, every synthesized range, and the truth states.
pub fn streams_from_run(log: &RunLog) -> SensorStreams {
    let mut streams = SensorStreams::default();
    for e in &log.epochs {
        streams.imu.push(ImuSample { t: e.t, gyro: e.gyro, accel: e.specific_force });
        if let Some(r) = &e.range {
            streams.ranges.push(RangeSample {
                t: e.t,
                anchor_id: r.anchor_id,
                range: r.measured,
                outlier: r.injected_outlier,
            });
        }
        if let Some(truth) = &e.truth {
            streams.truth.push(TruthRecord { t: e.t, state: *truth });
        }
    }
    streams
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn well_formed_rows_parse() {
        let text = "0.0,imu,0.1,0.2,0.3,0.0,0.0,0.0\n0.0,range,2,1.5,0\n0.01,truth,1,2,3,0,0,0,0,0,0,1,0,0,0\n";
        let s = parse_sensor_log_str(text).unwrap();
        assert_eq!(s.imu.len(), 1);
        assert_eq!(s.ranges.len(), 1);
        assert_eq!(s.truth.len(), 1);
        assert_eq!(s.ranges[0].anchor_id, 2);
        assert_eq!(s.truth[0].state.position, Vec3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn wrong_field_count_names_the_line() {
        let text = "0.0,imu,0.1,0.2,0.3,0.0,0.0,0.0\n0.1,imu,0.1,0.2\n";
        match parse_sensor_log_str(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_monotone_timestamps_name_the_line() {
        let text = "1.0,range,0,2.0,0\n0.5,range,0,2.0,0\n";
        match parse_sensor_log_str(text) {
            Err(Error::Ordering { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected ordering error, got {other:?}"),
        }
    }

    #[test]
    fn streams_are_independent_for_monotonicity() {
        // interleaved kinds may step backwards relative to each other
        let text = "1.0,imu,0,0,0,0,0,0\n0.5,range,0,2.0,0\n";
        assert!(parse_sensor_log_str(text).is_ok());
    }

    #[test]
    fn empty_file_gives_empty_streams() {
        let s = parse_sensor_log_str("").unwrap();
        assert!(s.is_empty());
        let s = parse_sensor_log_str("# only a comment\n\n").unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn unknown_kind_rejected() {
        assert!(matches!(
            parse_sensor_log_str("0.0,magnetometer,1,2,3\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn bad_outlier_flag_rejected() {
        assert!(parse_sensor_log_str("0.0,range,0,1.0,2\n").is_err());
        assert!(parse_sensor_log_str("0.0,range,0,-1.0,0\n").is_err());
    }

    #[test]
    fn round_trip_is_identity() {
        let text = "0,imu,0.1,0.30000000000000004,-0.2,0,1e-300,6.123233995736766e-17\n0,range,3,1.4142135623730951,1\n0.01,imu,0,0,0,0,0,0\n0.01,truth,0.1,0.2,0.3,0,0,0,0,0,0.7071067811865476,0.7071067811865476,0,0,0.6283185307179586\n";
        let parsed = parse_sensor_log_str(text).unwrap();
        let emitted = sensor_log_to_string(&parsed);
        let reparsed = parse_sensor_log_str(&emitted).unwrap();
        assert_eq!(parsed, reparsed);
        // all float payloads survive bitwise
        assert_eq!(parsed.imu[0].gyro.y, 0.30000000000000004);
        assert_eq!(reparsed.imu[0].gyro.y, 0.30000000000000004);
        assert_eq!(reparsed.ranges[0].range, std::f64::consts::SQRT_2);
    }
}
