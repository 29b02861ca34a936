//! `certdyn`: Lieb-Robinson calculators, Trotter scans, state certification,
//! measurement simulation and circuit decomposition from the command line.
//!
//! Exit status is 0 on success, 2 when the requested bound does not apply at
//! the given parameters, and 1 on any error or failed `--verify` check.

mod commands;
mod config;
mod output;
mod sources;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::Outcome;
use sources::{parse_real, HamiltonianSource, LatticeSource, NumList, SizeList};

#[derive(Parser, Debug)]
#[command(name = "certdyn", version, about = "Certified simulation of local quantum dynamics")]
#[command(after_help = "Any subcommand also accepts --config FILE.json; its keys act as flags given before the \
command-line flags, so explicit flags win. The dense-matrix dimension cap is read from CERTDYN_DIM_CAP.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Distance needed for a Lieb-Robinson truncation error below eps.
    #[command(args_override_self = true)]
    LrCalc(LrCalcArgs),
    /// Exact versus first-order Trotter error on chains of several lengths (CSV).
    #[command(args_override_self = true)]
    TrotterScan(TrotterArgs),
    /// Certificate for a prepared state against the evolved product state.
    #[command(args_override_self = true)]
    Certify(CertifyArgs),
    /// Decompose the evolution into local unitaries and report error bounds.
    #[command(args_override_self = true)]
    Decompose(DecomposeArgs),
    /// Simulated measurement estimate of the truncated witness.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Randomized checks of metric-geometry (and optionally norm) properties.
    #[command(args_override_self = true)]
    GeometryCheck(GeometryArgs),
}

#[derive(Args, Debug)]
pub struct LrCalcArgs {
    /// Structural parameters JSON (J, a, Z, M, kappa, Y, v, ...).
    #[arg(long, value_name = "FILE")]
    pub params: Option<PathBuf>,
    #[command(flatten)]
    pub source: HamiltonianSource,
    #[arg(long, value_parser = parse_real, allow_hyphen_values = true)]
    pub t: f64,
    #[arg(long, value_parser = parse_real)]
    pub eps: f64,
    #[arg(long, value_parser = parse_real, default_value = "0.5")]
    pub q: f64,
    /// Operator norm of the evolved observable.
    #[arg(long, value_parser = parse_real, default_value = "1")]
    pub norm_a: f64,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrotterArgs {
    #[arg(long, default_value = "heisenberg")]
    pub model: String,
    /// Chain lengths: an inclusive range `a..b` or a comma-separated list.
    #[arg(long, default_value = "2..10")]
    pub n: SizeList,
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    /// Evolution time in units of 1/J, J being the first coupling; fractions allowed.
    #[arg(long, value_parser = parse_real, default_value = "11/9")]
    pub t: f64,
    #[arg(long, value_name = "LIST")]
    pub coupling: Option<NumList>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Fail if any error exceeds its bound.
    #[arg(long)]
    pub verify: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Style {
    Singleton,
    Cubes,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Scheme {
    PauliSettings,
    ObservableEigenbasis,
}

#[derive(Args, Debug)]
pub struct WitnessArgs {
    #[command(flatten)]
    pub source: HamiltonianSource,
    /// Product initial state JSON; all sites in the first basis state when omitted.
    #[arg(long, value_name = "FILE")]
    pub state: Option<PathBuf>,
    #[arg(long, value_parser = parse_real, allow_hyphen_values = true)]
    pub t: f64,
    /// Target infidelity.
    #[arg(long = "I", value_parser = parse_real)]
    pub infidelity: f64,
    /// Per-term tolerance; defaults to I/(2n).
    #[arg(long, value_parser = parse_real)]
    pub gamma: Option<f64>,
    #[arg(long, value_parser = parse_real, default_value = "0.5")]
    pub q: f64,
    #[arg(long, value_enum, default_value = "singleton")]
    pub style: Style,
    /// Use the whole lattice as every truncation region (no truncation error).
    #[arg(long)]
    pub full_regions: bool,
    /// Density matrix JSON; defaults to the exactly evolved state.
    #[arg(long, value_name = "FILE")]
    pub rho: Option<PathBuf>,
    /// Mix the evolved state with the maximally mixed state at this weight.
    #[arg(long, value_parser = parse_real)]
    pub depolarize: Option<f64>,
}

#[derive(Args, Debug)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub witness: WitnessArgs,
    /// Also estimate Tr(rho G') from this many simulated shots per term.
    #[arg(long)]
    pub shots: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "pauli-settings")]
    pub scheme: Scheme,
    /// Per-term expectations as CSV.
    #[arg(long, value_name = "FILE")]
    pub terms_csv: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Check ||G - G'|| <= delta and the certificate against dense evolution.
    #[arg(long)]
    pub verify: bool,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub witness: WitnessArgs,
    #[arg(long)]
    pub shots: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "pauli-settings")]
    pub scheme: Scheme,
    #[arg(long, value_name = "FILE")]
    pub terms_csv: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Mode {
    Hypercubic,
    Sequential,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Order {
    Ascending,
    Color,
}

#[derive(Args, Debug)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub source: HamiltonianSource,
    #[arg(long, value_enum, default_value = "hypercubic")]
    pub mode: Mode,
    /// Cube edge for the hypercubic construction.
    #[arg(long)]
    pub omega: Option<usize>,
    /// Radius parameter for the sequential construction.
    #[arg(long, value_parser = parse_real)]
    pub r: Option<f64>,
    #[arg(long, value_enum, default_value = "ascending")]
    pub order: Order,
    #[arg(long, value_parser = parse_real, allow_hyphen_values = true)]
    pub t: f64,
    #[arg(long, value_parser = parse_real, default_value = "0", allow_hyphen_values = true)]
    pub s: f64,
    #[arg(long, value_parser = parse_real, default_value = "0.5")]
    pub q: f64,
    /// Target error; picks the smallest admissible omega when --omega is absent.
    #[arg(long, value_parser = parse_real)]
    pub eps: Option<f64>,
    /// Compare against the dense evolution and fail on any violated bound.
    #[arg(long)]
    pub verify: bool,
    /// Write every factor as a binary operator file plus a JSON manifest.
    #[arg(long, value_name = "DIR")]
    pub dump_dir: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GeometryArgs {
    #[command(flatten)]
    pub lattice: LatticeSource,
    #[arg(long, default_value_t = 10_000)]
    pub cases: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also run the norm and distance inequality suite.
    #[arg(long)]
    pub inequalities: bool,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::LrCalc(a) => commands::lr_calc(a),
        Command::TrotterScan(a) => commands::trotter_scan(a),
        Command::Certify(a) => commands::certify(a),
        Command::Decompose(a) => commands::decompose(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::GeometryCheck(a) => commands::geometry_check(a),
    }
}

fn main() -> ExitCode {
    let args = match config::expand(std::env::args_os().collect::<Vec<OsString>>()) {
        Ok(args) => args,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors are failures; exit status 2 is reserved for inapplicable bounds.
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::NotApplicable) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
