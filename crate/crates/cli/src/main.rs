use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dollard_cli::commands;
use dollard_cli::config::{Resolved, RunConfig};
use dollard_cli::manifest::{sha256_hex, Recorder};
use dollard_cli::{CliError, WORKERS_ENV};

/// Numerical laboratory for modified scattering of long-range Hartree equations.
///
/// Exit status: 0 success, 1 usage, 2 numerical failure, 3 gated-claim failure.
/// The worker count comes from DOLLARD_WORKERS (default: all cores).
#[derive(Parser, Debug)]
#[command(name = "dollard", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Paths {
    /// TOML run configuration.
    config: PathBuf,
    /// Output directory; defaults to `output` from the configuration.
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate the auxiliary system from free data over the window.
    SimulateAux(Paths),
    /// Build the wave operator over the seed schedule.
    WaveOperator(Paths),
    /// Recover w+ and s02(1) from a simulate-aux output.
    ExtractAsymptotics(Paths),
    /// Run the rate acceptance suite.
    VerifyRates(Paths),
    /// Run the operator identity checks.
    CheckIdentities(Paths),
    /// Compare the auxiliary trajectory with the direct split-step solver.
    CrossCheck(Paths),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::SimulateAux(_) => "simulate-aux",
            Command::WaveOperator(_) => "wave-operator",
            Command::ExtractAsymptotics(_) => "extract-asymptotics",
            Command::VerifyRates(_) => "verify-rates",
            Command::CheckIdentities(_) => "check-identities",
            Command::CrossCheck(_) => "cross-check",
        }
    }

    fn paths(&self) -> &Paths {
        match self {
            Command::SimulateAux(p)
            | Command::WaveOperator(p)
            | Command::ExtractAsymptotics(p)
            | Command::VerifyRates(p)
            | Command::CheckIdentities(p)
            | Command::CrossCheck(p) => p,
        }
    }
}

fn init_workers() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Usage(format!("{WORKERS_ENV}={raw:?} is not a positive integer"))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot start {n} workers: {e}")))
}

#[derive(Default)]
struct Echo {
    sha256: Option<String>,
    config: Option<serde_json::Value>,
}

fn load(paths: &Paths, echo: &mut Echo) -> Result<(Resolved, PathBuf), CliError> {
    let (raw, text) = RunConfig::load(&paths.config)?;
    echo.sha256 = Some(sha256_hex(text.as_bytes()));
    echo.config = serde_json::to_value(&raw).ok();
    let base = paths
        .config
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let out = paths
        .out
        .clone()
        .or_else(|| raw.output.as_ref().map(|o| base.join(o)))
        .ok_or_else(|| CliError::Usage("no output directory given".into()))?;
    let resolved = raw.resolve(&base)?;
    Ok((resolved, out))
}

fn run(cmd: &Command, rec: &mut Recorder) -> (Option<PathBuf>, Result<(), CliError>) {
    let mut echo = Echo::default();
    let loaded = rec.stage("config", || load(cmd.paths(), &mut echo));
    rec.config_sha256 = echo.sha256;
    rec.config = echo.config;
    let (cfg, out) = match loaded {
        Ok(v) => v,
        Err(e) => return (cmd.paths().out.clone(), Err(e)),
    };
    (Some(out.clone()), dispatch(cmd, &cfg, &out, rec))
}

fn dispatch(cmd: &Command, cfg: &Resolved, out: &Path, rec: &mut Recorder) -> Result<(), CliError> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", out.display())))?;
    match cmd {
        Command::SimulateAux(_) => commands::simulate_aux(cfg, out, rec),
        Command::WaveOperator(_) => commands::wave_operator_cmd(cfg, out, rec),
        Command::ExtractAsymptotics(_) => commands::extract_asymptotics(cfg, out, rec),
        Command::VerifyRates(_) => commands::verify_rates(cfg, out, rec),
        Command::CheckIdentities(_) => commands::check_identities(cfg, out, rec),
        Command::CrossCheck(_) => commands::cross_check(cfg, out, rec),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = init_workers() {
        eprintln!("dollard: {e}");
        return ExitCode::from(e.exit_code());
    }
    let mut rec = Recorder::new(cli.command.name());
    let (out, result) = run(&cli.command, &mut rec);
    let code = match &result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("dollard: {e}");
            e.exit_code()
        }
    };
    if let Some(dir) = out {
        if let Err(e) = rec.finish(&dir, code) {
            eprintln!("dollard: cannot write manifest in {}: {e}", dir.display());
            return ExitCode::from(code.max(2));
        }
    }
    ExitCode::from(code)
}
