//! Configuration files, sensor-log parsing and replay, and CSV emission.
//!
//! Run configuration is a single TOML file with a strict schema (unknown
//! keys are rejected) so a seeded run is reproducible from the file alone.
//! Sensor logs and results are plain CSV; all file writes go through a
//! write-temp-then-rename step so a crashed run never leaves a truncated
//! file that parses successfully.

pub mod cli;
mod emit;
mod replay;
mod sensor_log;

pub use emit::{emit_results, write_mc_report};
pub use replay::replay;
pub use sensor_log::{
    parse_sensor_log, parse_sensor_log_str, sensor_log_to_string, streams_from_run,
    write_sensor_log, SensorStreams, TruthRecord,
};

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sim::ScenarioConfig;

/// Load and validate a scenario configuration from a TOML file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Configuration(format!("cannot read config {}: {e}", path.display())))?;
    let cfg: ScenarioConfig = toml::from_str(&text)
        .map_err(|e| Error::Configuration(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Serialize a scenario configuration to a TOML file (atomic).
pub fn save_config(path: &Path, cfg: &ScenarioConfig) -> Result<()> {
    let text = toml::to_string_pretty(cfg)
        .map_err(|e| Error::Configuration(format!("cannot serialize config: {e}")))?;
    atomic_write(path, text.as_bytes())
}

/// Write a file atomically: write to `<path>.tmp`, then rename into place.
pub(crate) fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.tmp", ext.to_string_lossy()),
        None => "tmp".to_string(),
    });
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{preset, PRESET_NAMES};

    #[test]
    fn config_round_trips_through_toml() {
        let dir = std::env::temp_dir().join(format!("proxnav_cfg_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        for name in PRESET_NAMES {
            let cfg = preset(name).unwrap();
            let path = dir.join(format!("{name}.toml"));
            save_config(&path, &cfg).unwrap();
            let loaded = load_config(&path).unwrap();
            // serialize both ways; TOML text equality is the strictest check
            assert_eq!(
                toml::to_string_pretty(&cfg).unwrap(),
                toml::to_string_pretty(&loaded).unwrap(),
                "{name} did not round-trip"
            );
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let cfg = preset("turntable").unwrap();
        let mut text = toml::to_string_pretty(&cfg).unwrap();
        text.push_str("\nunknown_key = 1\n");
        let parsed: std::result::Result<ScenarioConfig, _> = toml::from_str(&text);
        assert!(parsed.is_err());
    }

    #[test]
    fn missing_config_file_reports_path() {
        let err = load_config(Path::new("/nonexistent/place/run.toml")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/place/run.toml"));
    }
}
