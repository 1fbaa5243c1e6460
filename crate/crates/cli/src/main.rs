//! `ltube` binary: flag parsing and exit-code mapping. All command logic
//! lives in the `ltube_cli` library crate.
//!
//! Exit codes: 0 success, 1 comparison/self-test threshold failure, 2
//! invalid input (bad flags, rejected tube description, or I/O failure).

use std::io::{IsTerminal, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ltube_cli::canon::Canonical;
use ltube_cli::commands::{self, CompareOpts, Observable, Oracle, SweepOpts};
use ltube_cli::emit::Format;
use ltube_cli::CliError;
use ltube_core::LatticeKind;

/// Random-walk observables on periodic lattice tubes with absorbing ends.
#[derive(Parser)]
#[command(name = "ltube", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Expected visit counts for every site of the tube.
    Field {
        #[command(flatten)]
        spec: SpecArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Absorption probabilities at the two tube ends.
    Absorb {
        #[command(flatten)]
        spec: SpecArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Per-row field sums along the tube axis.
    Profile {
        #[command(flatten)]
        spec: SpecArgs,
        #[command(flatten)]
        out: OutArgs,
        /// Also report the ramp slope, its bias minimizer, and the minimal
        /// slope (honeycomb only).
        #[arg(long)]
        slope_analysis: bool,
    },
    /// A scalar observable across a log-spaced bias grid.
    Sweep {
        #[command(flatten)]
        spec: SpecArgs,
        #[command(flatten)]
        out: OutArgs,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Check the closed-form field against an independent oracle.
    Compare {
        #[command(flatten)]
        spec: SpecArgs,
        /// Reference implementation to compare against.
        #[arg(long, value_enum, default_value = "linear")]
        oracle: OracleArg,
        /// Number of random walks (mc oracle only; default 200000).
        #[arg(long, value_name = "INT")]
        walks: Option<u64>,
        /// Base RNG seed (mc oracle only; default 0).
        #[arg(long, value_name = "U64")]
        seed: Option<u64>,
        /// Write the report to this file instead of standard output.
        #[arg(short = 'o', long = "output", value_name = "PATH")]
        output: Option<PathBuf>,
    },
    /// Run the built-in numeric smoke tests.
    Selftest,
}

#[derive(Args)]
struct SpecArgs {
    /// Tube geometry.
    #[arg(long, value_enum)]
    lattice: LatticeArg,
    /// Highest ring coordinate; the tube has m+1 columns around.
    #[arg(short = 'm', value_name = "INT", allow_hyphen_values = true)]
    m: i64,
    /// Number of interior rows between the absorbing ends.
    #[arg(short = 'n', value_name = "INT", allow_hyphen_values = true)]
    n: i64,
    /// Axial step weight relative to ring steps.
    #[arg(long, value_name = "FLOAT", allow_hyphen_values = true)]
    eta: f64,
    /// Source site "a,b" (ring column, axial row).
    #[arg(long, value_name = "A,B", value_parser = parse_source, allow_hyphen_values = true)]
    source: (i64, i64),
}

#[derive(Args)]
struct OutArgs {
    /// Output encoding.
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Write output to this file instead of standard output.
    #[arg(short = 'o', long = "output", value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Swept parameter (only "eta" is supported).
    #[arg(long, default_value = "eta")]
    param: String,
    /// First bias value of the grid.
    #[arg(long, value_name = "FLOAT", allow_hyphen_values = true)]
    from: f64,
    /// Last bias value of the grid.
    #[arg(long, value_name = "FLOAT", allow_hyphen_values = true)]
    to: f64,
    /// Number of log-spaced grid points.
    #[arg(long, value_name = "INT", value_parser = clap::value_parser!(u32).range(1..))]
    steps: u32,
    /// Quantity to evaluate at each grid point.
    #[arg(long, value_enum)]
    observable: ObservableArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum LatticeArg {
    Square,
    Triangular,
    Honeycomb,
}

impl From<LatticeArg> for LatticeKind {
    fn from(v: LatticeArg) -> Self {
        match v {
            LatticeArg::Square => LatticeKind::Square,
            LatticeArg::Triangular => LatticeKind::Triangular,
            LatticeArg::Honeycomb => LatticeKind::Honeycomb,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(v: FormatArg) -> Self {
        match v {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ObservableArg {
    /// Probability of absorption at the q = 0 end.
    #[value(name = "total_left")]
    TotalLeft,
    /// Largest expectation value on the grid.
    Peak,
    /// Slope of the ramp between the source row and the far end.
    Slope,
}

impl From<ObservableArg> for Observable {
    fn from(v: ObservableArg) -> Self {
        match v {
            ObservableArg::TotalLeft => Observable::TotalLeft,
            ObservableArg::Peak => Observable::Peak,
            ObservableArg::Slope => Observable::Slope,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleArg {
    Linear,
    Mc,
}

impl From<OracleArg> for Oracle {
    fn from(v: OracleArg) -> Self {
        match v {
            OracleArg::Linear => Oracle::Linear,
            OracleArg::Mc => Oracle::Mc,
        }
    }
}

fn parse_source(s: &str) -> Result<(i64, i64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected two comma-separated integers \"a,b\", got {s:?}"))?;
    let a: i64 = a.trim().parse().map_err(|e| format!("ring column: {e}"))?;
    let b: i64 = b.trim().parse().map_err(|e| format!("axial row: {e}"))?;
    Ok((a, b))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<ExitCode, CliError> {
    match command {
        Command::Field { spec, out } => {
            let canon = canonical(&spec)?;
            let text = commands::field(&canon, out.format.into());
            write_out(out.output.as_deref(), &text)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Absorb { spec, out } => {
            let canon = canonical(&spec)?;
            let text = commands::absorb(&canon, out.format.into());
            write_out(out.output.as_deref(), &text)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Profile {
            spec,
            out,
            slope_analysis,
        } => {
            let canon = canonical(&spec)?;
            let text = commands::profile(&canon, out.format.into(), slope_analysis)?;
            write_out(out.output.as_deref(), &text)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { spec, out, sweep } => {
            let canon = canonical(&spec)?;
            let opts = SweepOpts {
                param: sweep.param,
                from: sweep.from,
                to: sweep.to,
                steps: sweep.steps,
                observable: sweep.observable.into(),
            };
            let text = commands::sweep(&canon, &opts, out.format.into())?;
            write_out(out.output.as_deref(), &text)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare {
            spec,
            oracle,
            walks,
            seed,
            output,
        } => {
            let canon = canonical(&spec)?;
            let opts = CompareOpts {
                oracle: oracle.into(),
                walks,
                seed,
                color: output.is_none() && color_enabled(),
            };
            let (text, pass) = commands::compare(&canon, &opts)?;
            write_out(output.as_deref(), &text)?;
            Ok(if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Selftest => {
            let (text, pass) = commands::selftest(color_enabled());
            write_out(None, &text)?;
            Ok(if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

fn canonical(spec: &SpecArgs) -> Result<Canonical, CliError> {
    Ok(Canonical::new(
        spec.lattice.into(),
        spec.m,
        spec.n,
        spec.eta,
        spec.source.0,
        spec.source.1,
    )?)
}

fn color_enabled() -> bool {
    std::io::stdout().is_terminal() && std::env::var_os("NO_COLOR").is_none()
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| CliError::Io {
            path: p.display().to_string(),
            source,
        }),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Io {
                path: "<stdout>".into(),
                source,
            }),
    }
}
