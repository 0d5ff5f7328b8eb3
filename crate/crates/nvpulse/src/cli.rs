//! Argument parsing and dispatch for the `nvpulse` binary.

use std::num::NonZeroUsize;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::commands::{self, Summary};
use crate::config::LoadedConfig;
use crate::error::{CliError, CliResult};
use crate::exec::Threaded;

/// Shaped-pulse design and readout simulation for defect-spin ensembles.
#[derive(Debug, Parser)]
#[command(name = "nvpulse", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Seed for every random draw; overrides `seed` in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Directory receiving the artifacts.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    /// `section.key=value`, applied after the config file is parsed.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    /// Worker threads; defaults to the number of available cores.
    #[arg(long, global = true)]
    pub threads: Option<NonZeroUsize>,
}

#[derive(Clone, Copy, Debug, Subcommand)]
pub enum Command {
    /// Optimize pulse coefficients over the configured ensemble.
    Optimize,
    /// Transfer fidelity over a detuning × amplitude grid.
    Map,
    /// Ensemble contrast versus drive frequency, with its steepest slope.
    Odmr,
    /// Optical pumping, reinitialization and pulse-train readout.
    Photophysics,
    /// Shot-noise magnetic sensitivity.
    Sensitivity,
    /// Sample a pulse file into normalized IQ columns.
    ExportWaveform,
}

/// What the binary prints and the status it exits with.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub code: u8,
    pub stdout: String,
    pub stderr: String,
}

pub fn run(cli: &Cli) -> CliResult<Summary> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::config("--config", "a configuration file is required"))?;
    let cfg = LoadedConfig::load(path, &cli.overrides, cli.seed)?;
    let exec = cli.threads.map_or_else(Threaded::available, Threaded::new);
    match cli.command {
        Command::Optimize => commands::optimize(&cfg, &cli.out, &exec),
        Command::Map => commands::map(&cfg, &cli.out, &exec),
        Command::Odmr => commands::odmr(&cfg, &cli.out, &exec),
        Command::Photophysics => commands::photophysics(&cfg, &cli.out, &exec),
        Command::Sensitivity => commands::sensitivity(&cfg, &cli.out),
        Command::ExportWaveform => commands::export(&cfg, &cli.out),
    }
}

pub fn summary_line(s: &Summary, wall_s: f64) -> String {
    let rabi = s.max_rabi_mhz.map(|r| format!(" max_rabi={r:.6} MHz")).unwrap_or_default();
    let files: Vec<String> = s.outputs.iter().map(|p| p.display().to_string()).collect();
    format!(
        "{}: {}={:.6e}{rabi} wall={wall_s:.2}s -> {}",
        s.command,
        s.objective_name,
        s.objective,
        files.join(", ")
    )
}

/// Runs a parsed command line, capturing its single summary line or error.
pub fn execute(cli: &Cli) -> Outcome {
    let start = Instant::now();
    match run(cli) {
        Ok(s) => Outcome {
            code: 0,
            stdout: summary_line(&s, start.elapsed().as_secs_f64()) + "\n",
            stderr: String::new(),
        },
        Err(e) => Outcome {
            code: u8::try_from(e.exit_code()).unwrap_or(1),
            stdout: String::new(),
            stderr: format!("error: {e}\n"),
        },
    }
}

/// Parses `args` (program name first) and executes; usage errors map to exit code 2.
pub fn execute_args<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(&cli),
        Err(e) => Outcome {
            code: u8::try_from(e.exit_code()).unwrap_or(2),
            stdout: String::new(),
            stderr: e.render().to_string(),
        },
    }
}

#[cfg(test)]
mod tests {
    use std::path::{Path, PathBuf};

    use super::*;
    use crate::io::Table;

    fn presets() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("presets")
    }

    fn run(args: &[&str]) -> Outcome {
        execute_args(std::iter::once("nvpulse").chain(args.iter().copied()))
    }

    /// A 4 x 4 ensemble and a short schedule keep each run near a second.
    const SMALL_RUN: [&str; 12] = [
        "--set",
        "ensemble.detuning_points=4",
        "--set",
        "ensemble.amplitude_points=4",
        "--set",
        "optimizer.steps=12",
        "--set",
        "optimizer.fixed_steps=6",
        "--set",
        "engine.magnus_steps=200",
        "--set",
        "engine.certify=false",
    ];

    fn small_optimize(out: &Path, threads: &str) -> Outcome {
        let config = presets().join("hyperfine-1p4mhz.toml");
        let mut args = vec![
            "optimize",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "11",
            "--threads",
            threads,
        ];
        args.extend_from_slice(&SMALL_RUN);
        run(&args)
    }

    fn table(path: PathBuf) -> Table {
        Table::parse(&std::fs::read_to_string(path).unwrap()).unwrap()
    }

    #[test]
    fn optimize_is_bitwise_reproducible_across_runs_and_thread_counts() {
        let dir = tempfile::tempdir().unwrap();
        let outs: Vec<PathBuf> = ["a", "b", "c"].iter().map(|d| dir.path().join(d)).collect();
        for (out, threads) in outs.iter().zip(["1", "1", "2"]) {
            let o = small_optimize(out, threads);
            assert_eq!(o.code, 0, "{}", o.stderr);
            assert_eq!(o.stdout.lines().count(), 1, "{}", o.stdout);
            let line = &o.stdout;
            assert!(line.starts_with("optimize: F_st=") && line.contains("max_rabi=") && line.contains("wall="));
        }
        for name in ["pulse.csv", "trace.csv"] {
            let first = std::fs::read(outs[0].join(name)).unwrap();
            for other in &outs[1..] {
                assert_eq!(first, std::fs::read(other.join(name)).unwrap(), "{name}");
            }
        }
        let pulse = table(outs[0].join("pulse.csv"));
        assert_eq!(pulse.header.get("seed"), Some("11"));
        assert_eq!(pulse.header.get("version"), Some(crate::VERSION));
        assert_eq!(pulse.header.get("config_sha256").map(str::len), Some(64));
        let trace = table(outs[0].join("trace.csv"));
        assert_eq!(trace.rows.len(), 13);
        assert_eq!(trace.header.get("seed"), Some("11"));
    }

    #[test]
    fn different_seeds_change_the_config_hash() {
        let dir = tempfile::tempdir().unwrap();
        let config = presets().join("sensitivity.toml");
        let mut hashes = Vec::new();
        for seed in ["1", "2"] {
            let out = dir.path().join(seed);
            let o = run(&["sensitivity", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", seed]);
            assert_eq!(o.code, 0, "{}", o.stderr);
            let t = table(out.join("sensitivity.csv"));
            assert_eq!(t.header.get("seed"), Some(seed));
            hashes.push(t.header.get("config_sha256").unwrap().to_owned());
        }
        assert_ne!(hashes[0], hashes[1]);
    }

    #[test]
    fn sensitivity_writes_one_row() {
        let dir = tempfile::tempdir().unwrap();
        let config = presets().join("sensitivity.toml");
        let o = run(&["sensitivity", "--config", config.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
        assert_eq!(o.code, 0, "{}", o.stderr);
        let t = table(dir.path().join("sensitivity.csv"));
        assert_eq!(t.rows.len(), 1);
        let eta = t.column("eta_t_per_sqrt_hz").unwrap()[0];
        assert!(eta > 0.0 && eta.is_finite());
    }

    #[test]
    fn missing_splitting_is_a_config_error_naming_it() {
        let dir = tempfile::tempdir().unwrap();
        let config = dir.path().join("map.toml");
        std::fs::write(&config, "[hyperfine]\nlevels = 3\n\n[drive]\nkind = \"flat\"\nrabi_mhz = 1.4\ntones = 1\n").unwrap();
        let o = run(&["map", "--config", config.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
        assert_eq!(o.code, 2);
        assert!(o.stderr.contains("splitting"), "{}", o.stderr);
        assert!(!dir.path().join("map.csv").exists());
    }

    #[test]
    fn parse_and_usage_errors_exit_with_config_code() {
        let dir = tempfile::tempdir().unwrap();
        let o = run(&["sensitivity", "--out", dir.path().to_str().unwrap()]);
        assert_eq!(o.code, 2);
        assert!(o.stderr.contains("--config"));

        assert_eq!(run(&["no-such-command"]).code, 2);

        let bad = dir.path().join("bad.toml");
        std::fs::write(&bad, "[optimizer\n").unwrap();
        assert_eq!(run(&["optimize", "--config", bad.to_str().unwrap()]).code, 2);

        let config = presets().join("hyperfine-1p4mhz.toml");
        let o = run(&["optimize", "--config", config.to_str().unwrap(), "--set", "optimizer.rabi_limit_mhz=-1"]);
        assert_eq!(o.code, 2);
        assert!(o.stderr.contains("rabi limit"), "{}", o.stderr);
    }

    #[test]
    fn unresolved_floquet_truncation_is_a_numerical_failure() {
        let dir = tempfile::tempdir().unwrap();
        let config = dir.path().join("map.toml");
        std::fs::write(
            &config,
            "[hyperfine]\nlevels = 1\n\n[drive]\nkind = \"pulse\"\npulse_file = \"pulse.csv\"\n\n\
             [engine]\nkind = \"floquet\"\nfloquet_tolerance = 1e-300\nfloquet_max_harmonics = 20\n\n\
             [map]\ndetuning_points = 2\nalpha_points = 2\n",
        )
        .unwrap();
        std::fs::write(
            dir.path().join("pulse.csv"),
            "# duration_us = 1.85\n# carrier_mhz = 0.0\nharmonic,ax_mhz,ay_mhz\n1,0.7,0.0\n2,0.1,0.2\n",
        )
        .unwrap();
        let o = run(&["map", "--config", config.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
        assert_eq!(o.code, 3, "{}", o.stderr);
        assert!(o.stderr.contains("not converged"), "{}", o.stderr);
    }

    #[test]
    fn waveform_export_round_trips_and_rejects_sub_nyquist_rates() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("pulse.csv"),
            "# duration_us = 1.85\n# carrier_mhz = 0.0\n# rabi_limit_mhz = 1.4\nharmonic,ax_mhz,ay_mhz\n\
             1,0.3,0.1\n2,-0.2,0.25\n3,0.1,-0.05\n4,0.05,0\n5,0,0.03\n6,0.02,0\n7,0,0\n8,0,0.02\n9,0.01,0\n10,0,0\n",
        )
        .unwrap();
        let config = dir.path().join("w.toml");
        std::fs::write(&config, "[waveform]\npulse_file = \"pulse.csv\"\nsample_rate_msps = 50.0\n").unwrap();
        let out = dir.path().join("out");
        let o = run(&["export-waveform", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(o.code, 0, "{}", o.stderr);
        let text = std::fs::read_to_string(out.join("waveform.csv")).unwrap();
        let t = Table::parse(&text).unwrap();
        assert_eq!(t.columns, ["t_s", "I_norm", "Q_norm"]);
        assert_eq!(t.rows.len(), 93);
        assert_eq!(t.rows[0], [0.0, 0.0, 0.0]);
        assert_eq!(t.render(), text);
        assert_eq!(t.header.get("rabi_limit_mhz"), Some("1.4"));
        assert!(text.lines().take_while(|l| l.starts_with('#')).count() >= 3);

        let o = run(&[
            "export-waveform",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--set",
            "waveform.sample_rate_msps=20",
        ]);
        assert_eq!(o.code, 2);
        assert!(o.stderr.contains("sample_rate_msps"), "{}", o.stderr);
    }

    #[test]
    fn flat_drive_odmr_is_symmetric() {
        let dir = tempfile::tempdir().unwrap();
        let config = dir.path().join("odmr.toml");
        std::fs::write(
            &config,
            "[hyperfine]\nlevels = 3\nsplitting_mhz = 2.16\n\n[ensemble]\ndetuning_points = 4\namplitude_points = 2\n\n\
             [drive]\nkind = \"flat\"\nrabi_mhz = 1.4\ntones = 1\n\n[odmr]\nhalf_width_mhz = 6.0\nstep_mhz = 0.5\n",
        )
        .unwrap();
        let o = run(&["odmr", "--config", config.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
        assert_eq!(o.code, 0, "{}", o.stderr);
        let c = table(dir.path().join("odmr.csv")).column("contrast").unwrap();
        assert_eq!(c.len(), 25);
        for k in 0..c.len() {
            assert!((c[k] - c[c.len() - 1 - k]).abs() < 1e-9);
        }
    }
}
