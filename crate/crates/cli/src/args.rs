use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "airyphase",
    version,
    about = "Solve y'' + w^2 t q0(t) y = 0 through an Airy phase function"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a phase function and write it as JSON.
    Phase(PhaseCmd),
    /// Fit initial or boundary conditions and evaluate the solution.
    Solve(SolveCmd),
    /// Time phase construction over a range of frequencies.
    Bench(BenchCmd),
}

#[derive(Args, Debug, Clone)]
pub struct CoeffArgs {
    /// The positive factor q0 of q = t q0(t), e.g. "1 + t^2".
    #[arg(long, value_name = "EXPR", conflicts_with = "builtin", allow_hyphen_values = true)]
    pub q0: Option<String>,

    /// A builtin coefficient: airy, ivp-q1, ivp-q2-as-printed, ivp-q3,
    /// bvp-q1, bvp-q2, bvp-q3 or legendre(nu,mu).
    #[arg(long, value_name = "NAME")]
    pub builtin: Option<String>,

    #[arg(long, value_name = "FLOAT")]
    pub omega: Option<f64>,

    /// Defaults to the builtin's domain, or [-5, 5] for --q0.
    #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true)]
    pub domain: Option<Vec<f64>>,
}

#[derive(Args, Debug, Clone, Copy)]
pub struct BuildArgs {
    /// Half-width of the turning-point window.
    #[arg(long, default_value_t = 0.25)]
    pub a0: f64,

    /// Chebyshev order (even).
    #[arg(long, default_value_t = 16)]
    pub k: usize,

    #[arg(long, default_value_t = 1e-13)]
    pub eps: f64,
}

#[derive(Args, Debug)]
pub struct PhaseCmd {
    #[command(flatten)]
    pub coeff: CoeffArgs,
    #[command(flatten)]
    pub build: BuildArgs,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SolveCmd {
    /// A phase written by `airyphase phase`, instead of building one.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["q0", "builtin"])]
    pub phase: Option<PathBuf>,
    #[command(flatten)]
    pub coeff: CoeffArgs,
    #[command(flatten)]
    pub build: BuildArgs,

    /// Initial conditions y(T0) = Y0, y'(T0) = DY0.
    #[arg(long, num_args = 3, value_names = ["T0", "Y0", "DY0"], allow_negative_numbers = true)]
    pub ivp: Option<Vec<f64>>,

    /// Dirichlet conditions y(TA) = YA, y(TB) = YB.
    #[arg(long, num_args = 4, value_names = ["TA", "YA", "TB", "YB"], allow_negative_numbers = true)]
    pub bvp: Option<Vec<f64>>,

    /// N equispaced points on [A, B].
    #[arg(long, num_args = 3, value_names = ["A", "B", "N"], allow_negative_numbers = true)]
    pub grid: Option<Vec<String>>,

    /// File with one evaluation point per line.
    #[arg(long, value_name = "FILE")]
    pub points: Option<PathBuf>,

    /// Evaluation points, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub at: Vec<f64>,

    /// Report log10|y| and the sign of y, valid beyond double range.
    #[arg(long)]
    pub scaled: bool,

    /// Also report points where the phase is below -100.
    #[arg(long)]
    pub unrestricted: bool,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Ivp,
    Bvp,
}

#[derive(Args, Debug)]
pub struct BenchCmd {
    #[arg(long, value_enum)]
    pub suite: Suite,

    /// Inclusive range of exponents e, w = 2^e.
    #[arg(long, default_value = "8..20")]
    pub omegas: String,

    /// Builds averaged per timing.
    #[arg(long, default_value_t = 100)]
    pub runs: usize,

    /// Seed for the error sample points.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Largest exponent for which errors against the reference are computed.
    #[arg(long, default_value_t = 12, allow_negative_numbers = true)]
    pub ref_cap: i32,

    /// Add ivp-q2-as-printed to the ivp suite.
    #[arg(long)]
    pub include_q2: bool,

    #[command(flatten)]
    pub build: BuildArgs,

    #[arg(long)]
    pub out: Option<PathBuf>,
}
