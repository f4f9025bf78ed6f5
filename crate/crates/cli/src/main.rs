//! `gaussweyl` command-line experiments.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 when a contract check fails
//! or a computation cannot meet its accuracy target.

mod commands;

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gaussweyl::report::{write_json, ContractStatus, Report};
use gaussweyl::Error;
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "gaussweyl", version, about = "Gaussian Weyl-Wigner calculus experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Semiclassical parameter
    #[arg(long, default_value_t = 1.0)]
    pub h: f64,
    /// Total-degree cutoff of the Hermite truncation
    #[arg(long = "N", default_value_t = 4)]
    pub n: usize,
    /// Number of Gaussian directions (defaults to the symbol's dimension)
    #[arg(long)]
    pub d: Option<usize>,
    /// Symbol, e.g. "gaussian:nu=2.0,anorm=1.0" or "box:a=inf"
    #[arg(long)]
    pub symbol: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Gauss-Hermite order for nested numeric checks
    #[arg(long = "quad-order")]
    pub quad_order: Option<usize>,
    /// Output file; standard output when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Wigner function of two Hermite functions, or a symbol, on a grid
    Wigner {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: commands::WignerArgs,
    },
    /// Truncated operator matrix of a symbol
    Opmatrix {
        #[command(flatten)]
        common: Common,
    },
    /// Eigenvalues of the truncated operator matrix
    Spectrum {
        #[command(flatten)]
        common: Common,
    },
    /// Gaussian non-positivity witness
    Nonpos {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: commands::NonposArgs,
    },
    /// Lower bound for radial symbols against the smallest eigenvalue
    Radial {
        #[command(flatten)]
        common: Common,
    },
    /// Garding lower bound against the smallest eigenvalue
    Garding {
        #[command(flatten)]
        common: Common,
    },
    /// Top eigenvalue of box-localization matrices
    Flandrin {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: commands::FlandrinArgs,
    },
    /// Convergence of projected Gaussian functionals
    Stochext {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: commands::StochArgs,
    },
    /// Heat decomposition and anti-Wick checks
    Heatcheck {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: commands::HeatArgs,
    },
}

/// Validated configuration, echoed into every report.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub args: Vec<String>,
    pub symbol: Option<String>,
    pub h: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub d: Option<usize>,
    pub quad_order: Option<usize>,
    pub seed: u64,
    pub out: Option<String>,
    pub format: Format,
}

impl RunConfig {
    fn new(command: &str, c: &Common) -> Result<Self, Failure> {
        if !(c.h > 0.0 && c.h.is_finite()) {
            return Err(Failure::Usage(format!("--h must be finite and positive, got {}", c.h)));
        }
        if c.d == Some(0) {
            return Err(Failure::Usage("--d must be at least 1".into()));
        }
        Ok(RunConfig {
            command: command.to_string(),
            args: std::env::args().skip(1).collect(),
            symbol: c.symbol.clone(),
            h: c.h,
            n: c.n,
            d: c.d,
            quad_order: c.quad_order,
            seed: c.seed,
            out: c.out.as_ref().map(|p| p.display().to_string()),
            format: c.format,
        })
    }
}

/// Finished command: JSON results plus a CSV rendering of its main table.
pub struct Output {
    pub reference: &'static str,
    pub results: serde_json::Value,
    pub csv: Vec<u8>,
    pub quadrature: Vec<serde_json::Value>,
    pub contract: ContractStatus,
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Compute(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. }
            | Error::Parse { .. }
            | Error::DegreeTooLarge { .. }
            | Error::SupportExceedsDim { .. }
            | Error::DimensionMismatch { .. }
            | Error::QuadratureBudget { .. }
            | Error::Unsupported(_) => Failure::Usage(e.to_string()),
            other => Failure::Compute(other),
        }
    }
}

fn emit(config: &RunConfig, out: Output) -> io::Result<()> {
    let mut report = Report::new(out.reference, config, &out.results);
    report.quadrature = out.quadrature;
    report.contract = out.contract;
    let to_io = |e: Error| io::Error::other(e.to_string());
    match (config.format, &config.out) {
        (Format::Json, Some(path)) => write_json(File::create(path)?, &report).map_err(to_io),
        (Format::Json, None) => write_json(io::stdout().lock(), &report).map_err(to_io),
        (Format::Csv, Some(path)) => {
            File::create(path)?.write_all(&out.csv)?;
            let meta = format!("{path}.meta.json");
            let stripped = Report::new(report.reference.clone(), config, serde_json::Value::Null);
            let stripped = Report {
                quadrature: report.quadrature.clone(),
                contract: report.contract.clone(),
                ..stripped
            };
            write_json(File::create(meta)?, &stripped).map_err(to_io)
        }
        (Format::Csv, None) => io::stdout().lock().write_all(&out.csv),
    }
}

fn run(cli: Cli) -> Result<(RunConfig, Output), Failure> {
    use commands as c;
    match cli.command {
        Command::Wigner { common, args } => {
            let cfg = RunConfig::new("wigner", &common)?;
            let out = c::wigner(&common, &args)?;
            Ok((cfg, out))
        }
        Command::Opmatrix { common } => Ok((RunConfig::new("opmatrix", &common)?, c::opmatrix(&common)?)),
        Command::Spectrum { common } => Ok((RunConfig::new("spectrum", &common)?, c::spectrum(&common)?)),
        Command::Nonpos { common, args } => Ok((RunConfig::new("nonpos", &common)?, c::nonpos(&common, &args)?)),
        Command::Radial { common } => Ok((RunConfig::new("radial", &common)?, c::radial(&common)?)),
        Command::Garding { common } => Ok((RunConfig::new("garding", &common)?, c::garding(&common)?)),
        Command::Flandrin { common, args } => Ok((RunConfig::new("flandrin", &common)?, c::flandrin(&common, &args)?)),
        Command::Stochext { common, args } => Ok((RunConfig::new("stochext", &common)?, c::stochext(&common, &args)?)),
        Command::Heatcheck { common, args } => Ok((RunConfig::new("heatcheck", &common)?, c::heatcheck(&common, &args)?)),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok((cfg, out)) => {
            let ok = out.contract.ok;
            let violations = out.contract.violations.clone();
            if let Err(e) = emit(&cfg, out) {
                eprintln!("error: cannot write output: {e}");
                return ExitCode::from(1);
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                let record = serde_json::json!({ "violation": { "command": cfg.command, "checks": violations } });
                eprintln!("{record}");
                ExitCode::from(2)
            }
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Compute(e)) => {
            let record = serde_json::json!({ "violation": { "error": e.to_string() } });
            eprintln!("{record}");
            ExitCode::from(2)
        }
    }
}
