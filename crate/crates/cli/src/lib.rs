//! Experiment runner for `genexp`: reads a JSON config or a built-in
//! preset, runs one check and writes a versioned JSON report plus CSV data.
//!
//! Exit codes: 0 for PASS-type verdicts, 1 for FAIL-type verdicts, 2 for
//! inconclusive ones and 3 for configuration or runtime errors.

pub mod commands;
pub mod config;
pub mod expr;
pub mod presets;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use commands::{execute, exit_code, Command, Outcome};
use config::{Config, ConfigError};

pub const SCHEMA_VERSION: u32 = 1;
pub const EXIT_ERROR: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "genexp",
    version,
    about = "Checks generalized exponential systems numerically"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Gram matrix orthonormality plus Parseval ratios.
    VerifyOnb(RunArgs),
    /// Frame bound estimates on a finite test space.
    FrameBounds(RunArgs),
    /// Packing, volume and histogram checks for a lattice tiling.
    TilingCheck(RunArgs),
    /// Empirical Beurling densities.
    Density(RunArgs),
    /// Coefficients, resynthesis and the L2 error.
    Reconstruct(RunArgs),
    /// Windowed block verification for group phases.
    Repdisc(RunArgs),
    /// Collision search and optional Jacobian check.
    ProbeInjectivity(RunArgs),
    /// Prints the built-in presets.
    ListPresets,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Name of a built-in config (see list-presets).
    #[arg(long)]
    preset: Option<String>,
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: one per core).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Serialize)]
struct Report<'a> {
    schema_version: u32,
    command: &'a str,
    preset: Option<&'a str>,
    verdict: &'a str,
    config: &'a Config,
    result: &'a serde_json::Value,
}

#[derive(Serialize)]
struct Meta<'a> {
    schema_version: u32,
    command: &'a str,
    version: &'a str,
    threads: usize,
    /// Seconds since the Unix epoch when the run finished.
    finished_unix_secs: u64,
}

/// Parses `argv` (program name first), runs, and returns the exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { 0 };
        }
    };
    let (cmd, args) = match cli.command {
        Sub::ListPresets => {
            let mut out = std::io::stdout().lock();
            for p in presets::PRESETS {
                let desc = presets::load(p.name)
                    .ok()
                    .and_then(|c| c.description)
                    .unwrap_or_default();
                let _ = writeln!(out, "{:<20} {:<32} {desc}", p.name, p.commands);
            }
            return 0;
        }
        Sub::VerifyOnb(a) => (Command::VerifyOnb, a),
        Sub::FrameBounds(a) => (Command::FrameBounds, a),
        Sub::TilingCheck(a) => (Command::TilingCheck, a),
        Sub::Density(a) => (Command::Density, a),
        Sub::Reconstruct(a) => (Command::Reconstruct, a),
        Sub::Repdisc(a) => (Command::Repdisc, a),
        Sub::ProbeInjectivity(a) => (Command::ProbeInjectivity, a),
    };
    match run_command(cmd, &args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn load_config(args: &RunArgs) -> Result<Config, ConfigError> {
    match (&args.config, &args.preset) {
        (Some(path), None) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| ConfigError(format!("reading {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
        }
        (None, Some(name)) => presets::load(name),
        _ => Err(ConfigError("give exactly one of --config and --preset".into())),
    }
}

fn run_command(cmd: Command, args: &RunArgs) -> Result<i32, ConfigError> {
    let config = load_config(args)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads.unwrap_or(0))
        .build()
        .map_err(|e| ConfigError(format!("thread pool: {e}")))?;
    let outcome: Outcome = pool.install(|| execute(cmd, &config))?;
    let report = Report {
        schema_version: SCHEMA_VERSION,
        command: cmd.name(),
        preset: args.preset.as_deref(),
        verdict: outcome.verdict,
        config: &config,
        result: &outcome.result,
    };
    let json = serde_json::to_string_pretty(&report).map_err(|e| ConfigError(e.to_string()))?;
    let out = args.out.clone().or_else(|| config.out.as_ref().map(PathBuf::from));
    match out {
        Some(dir) => {
            let meta = Meta {
                schema_version: SCHEMA_VERSION,
                command: cmd.name(),
                version: env!("CARGO_PKG_VERSION"),
                threads: pool.current_num_threads(),
                finished_unix_secs: SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0),
            };
            let meta = serde_json::to_string_pretty(&meta).map_err(|e| ConfigError(e.to_string()))?;
            write_outputs(&dir, &json, &meta, &outcome.artifacts)?;
            println!(
                "{} {}: {}",
                cmd.name(),
                outcome.verdict,
                dir.join("report.json").display()
            );
        }
        None => println!("{json}"),
    }
    Ok(exit_code(outcome.verdict))
}

fn write_outputs(dir: &Path, report: &str, meta: &str, artifacts: &[(String, Vec<u8>)]) -> Result<(), ConfigError> {
    let io = |e: std::io::Error| ConfigError(format!("writing to {}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    std::fs::write(dir.join("report.json"), format!("{report}\n")).map_err(io)?;
    std::fs::write(dir.join("report.meta.json"), format!("{meta}\n")).map_err(io)?;
    for (name, data) in artifacts {
        std::fs::write(dir.join(name), data).map_err(io)?;
    }
    Ok(())
}
