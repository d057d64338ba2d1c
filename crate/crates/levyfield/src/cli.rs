//! Command-line front end.
//!
//! Three subcommands share one JSON model document: `cf` prints exact
//! characteristic-function values, `simulate` writes replicate CSV rows,
//! `verify` runs the divisibility checks and reports a verdict. Data goes
//! to --out (written atomically) or stdout; progress notes go to stderr.
//!
//! Exit codes: 0 success, 1 verification failed, 2 bad configuration,
//! 3 numeric or output failure.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::charfn::{cf_pow, CumulantRequest};
use crate::config::ModelConfig;
use crate::simulate::{simulate_field, write_samples_csv};
use crate::verify::verify_infinite_divisibility;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFICATION_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "levyfield",
    version,
    about = "Exact characteristic functions, simulation, and divisibility checks \
             for kernel-integral random fields"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate the exact characteristic function on the configured grid
    Cf {
        /// Model document (JSON)
        #[arg(long)]
        config: PathBuf,
        /// Write the JSON report here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
        /// Power of the characteristic function to evaluate
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        /// Suppress progress notes on stderr
        #[arg(long)]
        quiet: bool,
    },
    /// Simulate field replicates and write CSV rows
    Simulate {
        /// Model document (JSON)
        #[arg(long)]
        config: PathBuf,
        /// Write the CSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the configured seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the configured replicate count
        #[arg(long)]
        replicates: Option<u64>,
        /// Suppress progress notes on stderr
        #[arg(long)]
        quiet: bool,
    },
    /// Run the infinite-divisibility verification suite
    Verify {
        /// Model document (JSON)
        #[arg(long)]
        config: PathBuf,
        /// Write the JSON report here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the configured seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the configured replicate count
        #[arg(long)]
        replicates: Option<u64>,
        /// Suppress progress notes on stderr
        #[arg(long)]
        quiet: bool,
    },
}

enum Failure {
    Config(String),
    Numeric(String),
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Numeric(_) => EXIT_NUMERIC,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Numeric(m) => m,
        }
    }
}

fn load_config(path: &Path) -> Result<ModelConfig, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    ModelConfig::from_json(&text).map_err(|e| Failure::Config(e.to_string()))
}

/// Write through a sibling temp file and rename, so readers never see a
/// half-written file.
fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "output path has no file name"))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let result = fs::write(&tmp, bytes).and_then(|_| fs::rename(&tmp, path));
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

fn emit(out: &Option<PathBuf>, bytes: &[u8]) -> Result<(), Failure> {
    match out {
        Some(path) => write_atomic(path, bytes)
            .map_err(|e| Failure::Numeric(format!("cannot write {}: {e}", path.display()))),
        None => io::stdout()
            .write_all(bytes)
            .map_err(|e| Failure::Numeric(format!("cannot write to stdout: {e}"))),
    }
}

fn note(quiet: bool, message: &str) {
    if !quiet {
        eprintln!("{message}");
    }
}

fn cmd_cf(config: &Path, out: &Option<PathBuf>, gamma: f64, quiet: bool) -> Result<i32, Failure> {
    let model = load_config(config)?;
    let request = CumulantRequest::new(
        model.triplet.clone(),
        model.kernel.clone(),
        model.points.clone(),
        model.quadrature.clone(),
    )
    .map_err(|e| Failure::Numeric(e.to_string()))?;
    let args = model.cf_arguments();
    let report = cf_pow(&request, &args, gamma).map_err(|e| Failure::Numeric(e.to_string()))?;
    let worst = report.error_estimates.iter().copied().fold(0.0f64, f64::max);
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Failure::Numeric(format!("cannot encode report: {e}")))?;
    emit(out, json.as_bytes())?;
    if out.is_some() {
        note(quiet, &format!(
            "cf: {} arguments at gamma {gamma}, worst error estimate {worst:.3e}",
            args.len()
        ));
    }
    Ok(EXIT_OK)
}

fn cmd_simulate(
    config: &Path,
    out: &Option<PathBuf>,
    seed: Option<u64>,
    replicates: Option<u64>,
    quiet: bool,
) -> Result<i32, Failure> {
    let mut model = load_config(config)?;
    if let Some(seed) = seed {
        model.simulation.seed = seed;
    }
    if let Some(replicates) = replicates {
        model.simulation.replicates = replicates;
    }
    model.validate().map_err(|e| Failure::Config(e.to_string()))?;
    let samples = simulate_field(
        &model.triplet,
        &model.kernel,
        &model.points,
        &model.simulation,
        &model.quadrature,
    )
    .map_err(|e| Failure::Numeric(e.to_string()))?;
    let mut csv = Vec::new();
    write_samples_csv(&samples, &mut csv)
        .map_err(|e| Failure::Numeric(format!("cannot encode rows: {e}")))?;
    emit(out, &csv)?;
    if out.is_some() {
        note(quiet, &format!(
            "simulate: {} replicates at {} points, seed {}",
            samples.len(),
            model.points.len(),
            model.simulation.seed
        ));
    }
    Ok(EXIT_OK)
}

fn cmd_verify(
    config: &Path,
    out: &Option<PathBuf>,
    seed: Option<u64>,
    replicates: Option<u64>,
    quiet: bool,
) -> Result<i32, Failure> {
    let mut model = load_config(config)?;
    if let Some(seed) = seed {
        model.simulation.seed = seed;
    }
    if let Some(replicates) = replicates {
        model.simulation.replicates = replicates;
    }
    model.validate().map_err(|e| Failure::Config(e.to_string()))?;
    let report = verify_infinite_divisibility(
        &model.triplet,
        &model.kernel,
        &model.points,
        &model.cf_arguments(),
        &model.simulation,
        &model.verification,
        &model.quadrature,
    )
    .map_err(|e| Failure::Numeric(e.to_string()))?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Failure::Numeric(format!("cannot encode report: {e}")))?;
    emit(out, json.as_bytes())?;
    note(
        quiet,
        &format!(
            "verify: {} KS tests, {} CF distances, {} eigenvalue checks: {}",
            report.ks.len(),
            report.cf_distances.len(),
            report.psd.len(),
            if report.passed { "passed" } else { "FAILED" }
        ),
    );
    Ok(if report.passed { EXIT_OK } else { EXIT_VERIFICATION_FAILED })
}

/// Run the CLI on explicit arguments; returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own help/usage text and picks the stream
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let outcome = match &cli.command {
        Command::Cf { config, out, gamma, quiet } => cmd_cf(config, out, *gamma, *quiet),
        Command::Simulate { config, out, seed, replicates, quiet } => {
            cmd_simulate(config, out, *seed, *replicates, *quiet)
        }
        Command::Verify { config, out, seed, replicates, quiet } => {
            cmd_verify(config, out, *seed, *replicates, *quiet)
        }
    };
    match outcome {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            failure.exit_code()
        }
    }
}

/// Entry point for the binary.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arguments_parse_into_the_right_command() {
        let cli = Cli::try_parse_from([
            "levyfield",
            "simulate",
            "--config",
            "model.json",
            "--seed",
            "42",
            "--replicates",
            "100",
            "--quiet",
        ])
        .unwrap();
        match cli.command {
            Command::Simulate { config, seed, replicates, quiet, out } => {
                assert_eq!(config, PathBuf::from("model.json"));
                assert_eq!(seed, Some(42));
                assert_eq!(replicates, Some(100));
                assert!(quiet);
                assert!(out.is_none());
            }
            other => panic!("parsed {other:?}"),
        }
    }

    #[test]
    fn gamma_defaults_to_one() {
        let cli = Cli::try_parse_from(["levyfield", "cf", "--config", "m.json"]).unwrap();
        match cli.command {
            Command::Cf { gamma, .. } => assert_eq!(gamma, 1.0),
            other => panic!("parsed {other:?}"),
        }
    }

    #[test]
    fn missing_config_flag_is_a_usage_error() {
        assert!(Cli::try_parse_from(["levyfield", "verify"]).is_err());
        assert_eq!(run_from(["levyfield", "verify"]), EXIT_CONFIG);
    }

    #[test]
    fn missing_config_file_exits_with_config_code() {
        assert_eq!(
            run_from(["levyfield", "cf", "--config", "/nonexistent/model.json"]),
            EXIT_CONFIG
        );
    }

    #[test]
    fn atomic_write_replaces_the_target() {
        let dir = std::env::temp_dir().join(format!("levyfield-cli-test-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let target = dir.join("report.json");
        write_atomic(&target, b"first").unwrap();
        write_atomic(&target, b"second").unwrap();
        assert_eq!(fs::read(&target).unwrap(), b"second");
        // no temp litter left behind
        let leftovers: Vec<_> = fs::read_dir(&dir)
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().ends_with(".tmp"))
            .collect();
        assert!(leftovers.is_empty());
        fs::remove_dir_all(&dir).unwrap();
    }
}
