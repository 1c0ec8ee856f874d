//! Command-line front end for the recovery experiments.
//!
//! Subcommands: `solve` (one experiment batch), `sweep` (a batch per grid
//! point along one axis), `prox-check` (closed-form prox vs. brute-force
//! oracle), `grad-check` (analytic vs. finite-difference envelope gradient).
//!
//! Exit codes: 0 success, 1 check failure, 2 configuration error, 3 I/O
//! error.

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

mod commands;
mod config;
mod output;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(String),
    Io(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Config(msg) => write!(f, "{msg}"),
            CliError::Io(msg) => write!(f, "{msg}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Sweep,
    ProxCheck,
    GradCheck,
}

#[derive(Debug)]
pub struct Options {
    pub command: Command,
    pub config_path: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub threads: usize,
    pub trace: bool,
    pub seed_override: Option<u64>,
    pub verbosity: i32,
}

const USAGE: &str = "\
usage: l1l2 <solve|sweep|prox-check|grad-check> [options]

options:
    --config <path>   declarative experiment config (required for solve/sweep)
    --out <dir>       output directory (default: current directory)
    --threads <k>     concurrent trial workers (default: 1)
    --trace           also write trace_<trial>.csv files (solve only)
    --seed <u64>      override the config seed
    -v, -q            more / less logging
";

fn parse_args(args: &[String]) -> Result<Options, CliError> {
    let mut iter = args.iter();
    let command = match iter.next().map(String::as_str) {
        Some("solve") => Command::Solve,
        Some("sweep") => Command::Sweep,
        Some("prox-check") => Command::ProxCheck,
        Some("grad-check") => Command::GradCheck,
        Some(other) => {
            return Err(CliError::Usage(format!("unknown subcommand `{other}`")));
        }
        None => return Err(CliError::Usage("missing subcommand".into())),
    };
    let mut options = Options {
        command,
        config_path: None,
        out_dir: PathBuf::from("."),
        threads: 1,
        trace: false,
        seed_override: None,
        verbosity: 0,
    };
    while let Some(flag) = iter.next() {
        let mut value_of = |name: &str| {
            iter.next()
                .cloned()
                .ok_or_else(|| CliError::Usage(format!("flag {name} needs a value")))
        };
        match flag.as_str() {
            "--config" => options.config_path = Some(PathBuf::from(value_of("--config")?)),
            "--out" => options.out_dir = PathBuf::from(value_of("--out")?),
            "--threads" => {
                let raw = value_of("--threads")?;
                options.threads = raw.parse().map_err(|_| {
                    CliError::Usage(format!("flag --threads expects a positive integer, got `{raw}`"))
                })?;
                if options.threads == 0 {
                    return Err(CliError::Usage("flag --threads must be at least 1".into()));
                }
            }
            "--trace" => options.trace = true,
            "--seed" => {
                let raw = value_of("--seed")?;
                options.seed_override = Some(raw.parse().map_err(|_| {
                    CliError::Usage(format!("flag --seed expects an unsigned integer, got `{raw}`"))
                })?);
            }
            "-v" => options.verbosity += 1,
            "-q" => options.verbosity -= 1,
            other => return Err(CliError::Usage(format!("unknown flag `{other}`"))),
        }
    }
    if matches!(command, Command::Solve | Command::Sweep) && options.config_path.is_none() {
        return Err(CliError::Usage(format!(
            "{} requires --config <path>",
            match command {
                Command::Solve => "solve",
                _ => "sweep",
            }
        )));
    }
    Ok(options)
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let options = match parse_args(&args) {
        Ok(options) => options,
        Err(err) => {
            eprintln!("error: {err}");
            eprint!("{USAGE}");
            return ExitCode::from(err.exit_code());
        }
    };
    let outcome = match options.command {
        Command::Solve => commands::solve(&options),
        Command::Sweep => commands::sweep(&options),
        Command::ProxCheck => commands::prox_check(&options),
        Command::GradCheck => commands::grad_check(&options),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
