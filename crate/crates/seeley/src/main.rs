use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use seeley::config::{ConfigError, Scenario, ScenarioConfig};
use seeley::run::{run, Command, RunError, RunOptions};
use seeley::scenarios;

#[derive(Parser, Debug)]
#[command(
    name = "seeley",
    version,
    about = "Off-diagonal Seeley-DeWitt coefficients along geodesics"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug, Clone)]
enum Cmd {
    /// Solve the boundary value problem and scan for conjugate points.
    Geodesic(#[command(flatten)] Flags),
    /// Coefficient table per point pair.
    Coefficients(#[command(flatten)] Flags),
    /// Sesqui-symmetry residuals; exit 1 if any exceeds --tol.
    AuditSymmetry(#[command(flatten)] Flags),
    /// Transport, eikonal, PDE and coincidence identities; exit 1 on any failure.
    VerifyIdentities(#[command(flatten)] Flags),
    /// Smooth resummation of factorially growing coefficients.
    BorelDemo(#[command(flatten)] Flags),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(clap::Args, Debug, Clone)]
struct Flags {
    /// Scenario file (TOML).
    #[arg(long, value_name = "PATH", conflicts_with = "scenario")]
    config: Option<PathBuf>,
    /// Built-in scenario instead of a file.
    #[arg(long, value_name = "NAME")]
    scenario: Option<String>,
    /// Highest coefficient order.
    #[arg(long, value_name = "N")]
    order: Option<usize>,
    /// Tolerance for audits.
    #[arg(long, value_name = "T", default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Seed for random point sampling.
    #[arg(long, value_name = "U64", default_value_t = 0)]
    seed: u64,
    /// Compare jet derivatives against finite differences.
    #[arg(long)]
    fd_crosscheck: bool,
}

const EXIT_EXCEEDED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn load(flags: &Flags, need_config: bool) -> Result<Option<Scenario>, ConfigError> {
    let cfg = match (&flags.config, &flags.scenario) {
        (Some(path), _) => ScenarioConfig::from_path(path)?,
        (None, Some(name)) => scenarios::by_name(name).ok_or_else(|| {
            ConfigError::Invalid(format!(
                "unknown scenario `{name}`; known: {}",
                scenarios::NAMES.join(", ")
            ))
        })?,
        (None, None) if need_config => {
            return Err(ConfigError::Invalid(
                "--config or --scenario is required".into(),
            ))
        }
        (None, None) => return Ok(None),
    };
    cfg.build().map(Some)
}

fn emit(text: &[u8], output: Option<&Path>) -> std::io::Result<()> {
    match output {
        Some(path) => std::fs::write(path, text),
        None => std::io::stdout().lock().write_all(text),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, flags) = match cli.command {
        Cmd::Geodesic(f) => (Command::Geodesic, f),
        Cmd::Coefficients(f) => (Command::Coefficients, f),
        Cmd::AuditSymmetry(f) => (Command::AuditSymmetry, f),
        Cmd::VerifyIdentities(f) => (Command::VerifyIdentities, f),
        Cmd::BorelDemo(f) => (Command::BorelDemo, f),
    };
    let scenario = match load(&flags, cmd != Command::BorelDemo) {
        Ok(Some(s)) => s,
        Ok(None) => scenarios::by_name("flat_massive")
            .unwrap()
            .build()
            .expect("built-in scenario"),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let ro = RunOptions {
        order: flags.order,
        tol: flags.tol,
        seed: flags.seed,
        fd_crosscheck: flags.fd_crosscheck,
    };
    let outcome = match run(cmd, &scenario, &ro) {
        Ok(o) => o,
        Err(RunError::Config(e)) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_NUMERICAL);
        }
    };
    let bytes = match flags.format {
        Format::Json => outcome.report.to_json().into_bytes(),
        Format::Csv => {
            let mut buf = Vec::new();
            if let Err(e) = outcome.report.write_csv(&mut buf) {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_NUMERICAL);
            }
            buf
        }
    };
    if let Err(e) = emit(&bytes, flags.output.as_deref()) {
        eprintln!("error: cannot write report: {e}");
        return ExitCode::from(EXIT_NUMERICAL);
    }
    if outcome.exceeded {
        eprintln!("audit: tolerance exceeded");
        return ExitCode::from(EXIT_EXCEEDED);
    }
    ExitCode::SUCCESS
}
