//! `dressed`: config-driven runs of the dressed-state master equation experiments.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical or I/O failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use dressed_core::Error;

use config::{Command, Overrides};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    pub fn from_core(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_)
            | Error::InvalidDims(_)
            | Error::Resonance(_)
            | Error::IndexOutOfRange { .. }
            | Error::TooLarge(_)
            | Error::Window(_) => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) | CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numeric(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o failure: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "dressed", version, about = "Dressed-state master equation experiments for the ultra-strongly coupled Rabi model")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Exact, adiabatic and Schrieffer-Wolff energy tables
    Spectrum(Common),
    /// Eigenstate fidelities of the adiabatic and Schrieffer-Wolff approximations
    Fidelity(Common),
    /// Ground-state fidelity under the standard and dressed master equations
    Relax(Common),
    /// Driven steady states in the pump frame
    Drive(Common),
    /// Two-tone spectroscopy scans
    Spectroscopy(Common),
    /// Validity report and secular margins
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: out)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    n_cut: Option<usize>,
    #[arg(long)]
    n_levels: Option<usize>,
    /// Worker threads for scans
    #[arg(long)]
    threads: Option<usize>,
    /// Reserved; there is no random number generator to seed
    #[arg(long)]
    seedless: bool,
}

fn run(cmd: Command, args: Common) -> Result<(), CliError> {
    if args.seedless {
        return Err(CliError::Config("--seedless is reserved: no random number generator exists".into()));
    }
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let overrides = Overrides { n_cut: args.n_cut, n_levels: args.n_levels };
    let cfg = config::load(args.config.as_deref())?.resolve(cmd, &overrides)?;
    let start = Instant::now();
    let bundle = match cmd {
        Command::Spectrum => commands::spectrum(&cfg),
        Command::Fidelity => commands::fidelity(&cfg),
        Command::Relax => commands::relax(&cfg),
        Command::Drive => commands::drive(&cfg),
        Command::Spectroscopy => commands::spectroscopy(&cfg),
        Command::Validate => commands::validate(&cfg),
    }?;
    let wall = start.elapsed().as_secs_f64();
    if cmd == Command::Validate {
        println!("{}", serde_json::to_string_pretty(&bundle.metadata).expect("metadata serializes"));
        if args.out.is_none() {
            return Ok(());
        }
    }
    let dir = args.out.unwrap_or_else(|| PathBuf::from("out"));
    for f in output::emit(&dir, &cfg, &bundle, wall)? {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match cli.command {
        Cmd::Spectrum(a) => (Command::Spectrum, a),
        Cmd::Fidelity(a) => (Command::Fidelity, a),
        Cmd::Relax(a) => (Command::Relax, a),
        Cmd::Drive(a) => (Command::Drive, a),
        Cmd::Spectroscopy(a) => (Command::Spectroscopy, a),
        Cmd::Validate(a) => (Command::Validate, a),
    };
    match run(cmd, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dressed: {e}");
            ExitCode::from(e.code())
        }
    }
}
