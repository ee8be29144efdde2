//! Command-line entry points.
//!
//! ```text
//! proxnav simulate   --config run.toml --out results/
//! proxnav montecarlo --config run.toml --runs 50 --seed 1 --out results/
//! proxnav replay     --log sensors.csv --config run.toml --out results/
//! proxnav scenarios  [--write-dir presets/]
//! ```
//!
//! Exit codes: 0 success, 2 usage error, 1 runtime failure. Diagnostics are
//! plain text (nothing to suppress under `NO_COLOR`).

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::Result;
use crate::sim::{self, consistency_check, monte_carlo, preset, preset_summary, PRESET_NAMES};

use super::{
    emit_results, load_config, parse_sensor_log, replay, save_config, streams_from_run,
    write_mc_report, write_sensor_log,
};

#[derive(Parser)]
#[command(
    name = "proxnav",
    version,
    about = "UWB/IMU pose estimation and closed-loop control simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write result CSVs plus a replayable sensor log.
    Simulate {
        /// Scenario configuration (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a seeded Monte Carlo batch and write the aggregate report.
    Montecarlo {
        /// Scenario configuration (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Number of independent runs.
        #[arg(long)]
        runs: usize,
        /// Seed of the first run; run i uses seed + i.
        #[arg(long)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay a recorded sensor log through the filter.
    Replay {
        /// Sensor log (CSV).
        #[arg(long)]
        log: PathBuf,
        /// Scenario configuration (TOML) describing anchors, noise, and the
        /// filter setup.
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// List the built-in scenario presets.
    Scenarios {
        /// Also write each preset as `<name>.toml` into this directory.
        #[arg(long)]
        write_dir: Option<PathBuf>,
    },
}

fn cmd_simulate(config: &Path, out: &Path) -> Result<()> {
    let cfg = load_config(config)?;
    let log = sim::run(&cfg)?;
    let report = consistency_check(&log)?;
    let mut written = emit_results(&log, &report, out)?;
    let sensor_path = out.join("sensor_log.csv");
    write_sensor_log(&sensor_path, &streams_from_run(&log))?;
    written.push(sensor_path);
    println!("scenario {} (seed {}): {} epochs", cfg.name, cfg.seed, log.epochs.len());
    if let Some(t) = &report.truth {
        println!(
            "terminal position error {:.4} m, attitude error {:.2} deg, rejected {:.1}% of {} ranges",
            t.terminal_pos_error,
            t.terminal_att_error.to_degrees(),
            100.0 * report.rejected_fraction,
            report.range_count
        );
    }
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_montecarlo(config: &Path, runs: usize, seed: u64, out: &Path) -> Result<()> {
    let cfg = load_config(config)?;
    let mc = monte_carlo(&cfg, runs, seed)?;
    let written = write_mc_report(&mc, out)?;
    println!("{} runs of {} (seeds {}..{})", mc.n_runs, cfg.name, seed, seed + runs as u64 - 1);
    if let Some(t) = &mc.pooled.truth {
        println!(
            "pooled position containment [{:.3} {:.3} {:.3}], mean position NEES {:.2}",
            t.containment_pos[0], t.containment_pos[1], t.containment_pos[2], t.mean_nees_pos
        );
    }
    println!(
        "terminal position error {:.4} ± {:.4} m, rejected fraction {:.3}",
        mc.terminal_pos_error_mean, mc.terminal_pos_error_std, mc.pooled.rejected_fraction
    );
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_replay(log_path: &Path, config: &Path, out: &Path) -> Result<()> {
    let cfg = load_config(config)?;
    let streams = parse_sensor_log(log_path)?;
    if streams.is_empty() {
        eprintln!("warning: sensor log {} is empty", log_path.display());
    }
    let (log, report) = replay(&streams, &cfg)?;
    let written = emit_results(&log, &report, out)?;
    println!(
        "replayed {} IMU epochs, {} ranges ({} rejected, {} stale)",
        log.epochs.len(),
        report.range_count,
        report.rejected_count,
        log.stale_ranges
    );
    if report.truth.is_none() {
        println!("no ground truth in log; containment metrics unavailable");
    }
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_scenarios(write_dir: Option<&Path>) -> Result<()> {
    for name in PRESET_NAMES {
        println!("{name}: {}", preset_summary(name));
    }
    if let Some(dir) = write_dir {
        std::fs::create_dir_all(dir)?;
        for name in PRESET_NAMES {
            let cfg = preset(name).expect("preset names are exhaustive");
            let path = dir.join(format!("{name}.toml"));
            save_config(&path, &cfg)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

/// Parse arguments and run; returns the process exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // help/version are "errors" to clap but successful outcomes here
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Simulate { config, out } => cmd_simulate(config, out),
        Command::Montecarlo { config, runs, seed, out } => cmd_montecarlo(config, *runs, *seed, out),
        Command::Replay { log, config, out } => cmd_replay(log, config, out),
        Command::Scenarios { write_dir } => cmd_scenarios(write_dir.as_deref()),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
