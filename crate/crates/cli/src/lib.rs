//! Command-line front end: stream generation, policy runs, parameter
//! sweeps, bound tables and feasibility checks.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use prefixsched::time::parse_rational;
use prefixsched::{Rational, Time};

mod commands;
pub mod sweep;

pub use sweep::{SweepRow, SweepSpec};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] prefixsched::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(prefixsched::Error::InvalidInstance(_)) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// How a successful command ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    Infeasible,
}

#[derive(Debug, Parser)]
#[command(
    name = "prefixsched",
    version,
    about = "Prefill scheduling experiments with prefix reuse"
)]
pub struct Cli {
    /// Seed for generators and tie-breaking
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Output file (standard output when omitted)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a query stream as JSON Lines
    #[command(subcommand)]
    Gen(GenCommand),
    /// Simulate one policy on a stream
    Run(RunArgs),
    /// Run a grid of policies and arrival settings
    Sweep(SweepArgs),
    /// Evaluate the closed-form TTFT bounds
    Bounds(BoundsArgs),
    /// Decide whether a TTFT limit can be met
    Feasible(FeasibleArgs),
}

#[derive(Debug, Subcommand)]
pub enum GenCommand {
    /// Regular arrivals in shuffled order
    Shuffled(ShuffledArgs),
    /// Reduction stream of a 3-PARTITION instance
    Partition(PartitionArgs),
    /// Poisson arrivals
    Poisson(PoissonArgs),
}

#[derive(Debug, Args)]
pub struct ShapeArgs {
    #[arg(long)]
    pub n: usize,
    /// Prompts per user prefix
    #[arg(long)]
    pub k_rep: usize,
    /// User prefix length
    #[arg(long)]
    pub u: usize,
    /// Document length
    #[arg(long)]
    pub d: usize,
}

#[derive(Debug, Args)]
pub struct ShuffledArgs {
    #[command(flatten)]
    pub shape: ShapeArgs,
    /// Gap between arrivals
    #[arg(long, value_parser = parse_time)]
    pub s: Time,
}

#[derive(Debug, Args)]
pub struct PartitionArgs {
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub h: u64,
    /// The 3m integers, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    pub a: Vec<u64>,
}

#[derive(Debug, Args)]
pub struct PoissonArgs {
    #[command(flatten)]
    pub shape: ShapeArgs,
    /// Arrivals per time unit
    #[arg(long)]
    pub rate: f64,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Stream file (JSON Lines)
    #[arg(long)]
    pub stream: PathBuf,
    /// fcfs, lpm, klpm:<k> or klpm:inf
    #[arg(long)]
    pub policy: String,
    /// immediate or delayed:<T>
    #[arg(long, default_value = "immediate", value_parser = parse_start)]
    pub start: StartArg,
    #[arg(long, default_value = "0", value_parser = parse_nonneg)]
    pub c_attn: Rational,
    /// Report completions in bins of this many queries
    #[arg(long)]
    pub batch: Option<usize>,
}

/// Start flag. `Delayed(None)` means "after the last regular arrival" and
/// is only meaningful for sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StartArg {
    Immediate,
    Delayed(Option<Time>),
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Cycle lengths; 1 is FCFS and inf is LPM
    #[arg(long, value_delimiter = ',', default_value = "1,2,inf")]
    pub k: Vec<String>,
    /// Regular arrival gaps
    #[arg(long, value_delimiter = ',', value_parser = parse_nonneg, conflicts_with = "rate")]
    pub s: Vec<Rational>,
    /// Poisson arrival rates
    #[arg(long, value_delimiter = ',')]
    pub rate: Vec<f64>,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k_rep: usize,
    #[arg(long)]
    pub u: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long, default_value = "0", value_parser = parse_nonneg)]
    pub c_attn: Rational,
    /// Seeds per grid point, counting up from --seed
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    /// immediate, delayed (after the last regular arrival) or delayed:<T>
    #[arg(long, value_parser = parse_start)]
    pub start: Option<StartArg>,
    /// Reported percentiles, in percent
    #[arg(long, value_delimiter = ',', default_value = "50,90,95,99", value_parser = parse_nonneg)]
    pub percentiles: Vec<Rational>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub u: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long, value_parser = parse_nonneg)]
    pub s: Rational,
    #[arg(long)]
    pub k: usize,
    /// Delayed start; defaults to s * n
    #[arg(long = "T", value_parser = parse_time)]
    pub start: Option<Time>,
    #[arg(long, default_value = "0", value_parser = parse_nonneg)]
    pub epsilon: Rational,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Exact,
    Percentile,
}

#[derive(Debug, Args)]
pub struct FeasibleArgs {
    #[arg(long)]
    pub stream: PathBuf,
    /// TTFT limit
    #[arg(long = "T", value_parser = parse_time)]
    pub limit: Time,
    /// Fraction of queries allowed to miss the limit (percentile mode)
    #[arg(long, value_parser = parse_nonneg)]
    pub p: Option<Rational>,
    #[arg(long, value_enum, default_value_t = Mode::Exact)]
    pub mode: Mode,
    #[arg(long, default_value = "0", value_parser = parse_nonneg)]
    pub c_attn: Rational,
    /// immediate or delayed:<T> (exact mode)
    #[arg(long, default_value = "immediate", value_parser = parse_start)]
    pub start: StartArg,
    /// Largest stream the exact search accepts
    #[arg(long, default_value_t = prefixsched::feasible::DEFAULT_EXACT_LIMIT)]
    pub max_queries: usize,
}

fn parse_time(s: &str) -> Result<Time, String> {
    s.parse().map_err(|e: prefixsched::Error| e.to_string())
}

fn parse_nonneg(s: &str) -> Result<Rational, String> {
    let r = parse_rational(s).map_err(|e| e.to_string())?;
    if r < Rational::from_integer(0) {
        return Err(format!("{s} is negative"));
    }
    Ok(r)
}

fn parse_start(s: &str) -> Result<StartArg, String> {
    match s {
        "immediate" => Ok(StartArg::Immediate),
        "delayed" => Ok(StartArg::Delayed(None)),
        other => match other.strip_prefix("delayed:") {
            Some(t) => Ok(StartArg::Delayed(Some(parse_time(t)?))),
            None => Err(format!(
                "expected immediate, delayed or delayed:<T>, got {other:?}"
            )),
        },
    }
}

/// Destination for a command's main output.
pub(crate) fn open_out<'a>(
    out: Option<&Path>,
    stdout: &'a mut dyn Write,
) -> CliResult<Box<dyn Write + 'a>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(stdout),
    })
}

/// Runs a parsed command, writing primary output to `stdout` (or `--out`)
/// and diagnostics to `stderr`.
pub fn execute(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<Status> {
    match &cli.command {
        Command::Gen(g) => commands::gen(cli, g, stdout, stderr),
        Command::Run(a) => commands::run(cli, a, stdout, stderr),
        Command::Sweep(a) => sweep::run(cli, a, stdout),
        Command::Bounds(a) => commands::bounds(cli, a, stdout),
        Command::Feasible(a) => commands::feasible(cli, a, stdout, stderr),
    }
}

/// Full program: parse, execute, map to an exit code.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let (mut out, mut err) = (io::stdout().lock(), io::stderr().lock());
    match execute(&cli, &mut out, &mut err) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Infeasible) => ExitCode::from(2),
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
