//! Command-line grammar.

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "contractivity",
    version,
    about = "Contraction certificates for firing-rate and Hopfield networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every command.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Seed of the random generator.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a given (P, Q) or search one in one condition cell.
    Certify(CertifyArgs),
    /// Generate contracting weights or recover generator variables.
    #[command(subcommand)]
    Param(ParamCommand),
    /// Map a certificate to another cell.
    Transform(TransformArgs),
    /// Synthesize a low-gain integral controller.
    Synth(SynthArgs),
    /// Simulate a network and optionally estimate its contraction rate.
    Simulate(SimulateArgs),
    /// Closed-loop reference tracking with a synthesized gain.
    Track(TrackArgs),
    /// Run the built-in regression anchors.
    Selftest(SelftestArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ArchFlag {
    #[value(name = "FR", alias = "fr")]
    Fr,
    #[value(name = "HOP", alias = "hop")]
    Hop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TimeFlag {
    #[value(name = "CT", alias = "ct")]
    Ct,
    #[value(name = "DT", alias = "dt")]
    Dt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NlFlag {
    #[value(name = "CONE", alias = "cone")]
    Cone,
    #[value(name = "MONE", alias = "mone")]
    Mone,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[arg(long)]
    pub cond: ArchFlag,
    #[arg(long)]
    pub time: TimeFlag,
    #[arg(long)]
    pub nl: NlFlag,
    /// Weight matrix file.
    #[arg(long = "W", alias = "w")]
    pub w: String,
    #[arg(long = "P", alias = "p", requires = "q")]
    pub p: Option<String>,
    #[arg(long = "Q", alias = "q", requires = "p")]
    pub q: Option<String>,
    /// Rate c (continuous time) or factor rho (discrete time).
    #[arg(long, allow_negative_numbers = true)]
    pub rate: f64,
    /// NSD tolerance of the check.
    #[arg(long)]
    pub tol: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Subcommand)]
pub enum ParamCommand {
    /// Draw (d, X, Y) and emit W with its certificate.
    Gen(ParamGenArgs),
    /// Recover (d, S, V, c) from an FR/CT/MONE certificate.
    Invert(ParamInvertArgs),
}

#[derive(Debug, Args)]
pub struct ParamGenArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub c: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ParamInvertArgs {
    #[arg(long)]
    pub cert: String,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TransformKind {
    Dual,
    Cone2mone,
    Disc2cts,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    pub kind: TransformKind,
    #[arg(long)]
    pub cert: String,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Plant file with W, B, C and delta.
    #[arg(long)]
    pub plant: String,
    /// Target reduced contraction rate.
    #[arg(long)]
    pub cr: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Model file with architecture, time, W, optional B and activation.
    #[arg(long)]
    pub model: String,
    /// Constant input `{"u": [...]}`; zero when absent.
    #[arg(long)]
    pub input: Option<String>,
    /// Initial state, comma separated; zero when absent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    /// Second initial state; enables the empirical rate estimate.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub y0: Option<Vec<f64>>,
    /// Metric for the rate estimate; identity when absent.
    #[arg(long = "P", alias = "p")]
    pub p: Option<String>,
    /// Final time (continuous) or number of steps (discrete).
    #[arg(long, default_value_t = 10.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = contractivity::sim::DEFAULT_STEP)]
    pub h: f64,
    #[arg(long, default_value_t = 1)]
    pub every: usize,
    /// CSV trace of the first trajectory.
    #[arg(long)]
    pub trace: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    #[arg(long)]
    pub plant: String,
    /// Report of `synth`, or a file with K, P, Q, Y and c_r.
    #[arg(long)]
    pub gain: String,
    /// Reference output, comma separated.
    #[arg(long = "ref", value_delimiter = ',', allow_hyphen_values = true)]
    pub reference: Vec<f64>,
    #[arg(long)]
    pub eps: f64,
    /// Horizon; 10 / (eps * c_r) when absent.
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long, default_value_t = contractivity::sim::DEFAULT_STEP)]
    pub h: f64,
    #[arg(long, default_value_t = 100)]
    pub every: usize,
    #[arg(long)]
    pub trace: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[command(flatten)]
    pub common: Common,
}
