//! Command-line front end: argument parsing, dispatch and output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use output::{Cell, Format, Manifest, Report, Table};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_TOLERANCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "ffcorr", version, about = "Fractional correlation functions of the free-fermion sine-Gordon model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Two-point function from the Fredholm determinant on a log-uniform r grid.
    Twopoint(TwoPointArgs),
    /// Lukyanov-Zamolodchikov one-point function.
    Onepoint(OnePointArgs),
    /// Sigma, psi and the radial ODE residuals.
    Painleve(PainleveArgs),
    /// Monte Carlo moment of the imaginary chaos on a periodic grid.
    Gmc(GmcArgs),
    /// Finite-volume branch-point derivative against the Fredholm route.
    TauConvergence(TauArgs),
    /// Cumulant kernel at the given momenta, with its Hoelder bound.
    Cumulant(CumulantArgs),
    /// Fractional GFF correlation and Z_rho(0) of a branch configuration.
    Gffcorr(GffArgs),
    /// Branch-point log-derivatives (and optionally log Z~) on a disk.
    Dirac(DiracArgs),
}

/// Options shared by every command. Not part of the manifest: they do not
/// change the numbers.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Output file (stdout if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker cap (default: available cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

impl Common {
    pub fn workers(&self) -> usize {
        self.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())).max(1)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TwoPointArgs {
    #[arg(long, default_value_t = 0.25, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 0.01)]
    pub r_min: f64,
    #[arg(long, default_value_t = 20.0)]
    pub r_max: f64,
    #[arg(long, default_value_t = 25)]
    pub points: usize,
    /// Outer quadrature nodes.
    #[arg(long, default_value_t = 128)]
    pub nodes: usize,
    #[arg(long, default_value_t = 128)]
    pub inner_nodes: usize,
    #[serde(skip)]
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OnePointArgs {
    #[arg(long, default_value_t = 0.25, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[serde(skip)]
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PainleveArgs {
    #[arg(long, default_value_t = 0.25, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 1.0)]
    pub r_min: f64,
    #[arg(long, default_value_t = 3.0)]
    pub r_max: f64,
    #[arg(long, default_value_t = 41)]
    pub points: usize,
    #[arg(long, default_value_t = 128)]
    pub nodes: usize,
    #[arg(long, default_value_t = 128)]
    pub inner_nodes: usize,
    #[serde(skip)]
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GmcArgs {
    /// TOML file with `[[charge]]` entries (alpha, cell = [i, j]).
    #[arg(long)]
    pub charges: PathBuf,
    #[arg(long = "box", default_value_t = 200.0)]
    pub box_len: f64,
    #[arg(long, default_value_t = 256)]
    pub grid: usize,
    #[arg(long, default_value_t = 1e-2)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.05)]
    pub mass: f64,
    #[arg(long, default_value_t = 20_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[serde(skip)]
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TauArgs {
    #[arg(long, default_value_t = 0.25, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    /// Separation of the pair.
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    /// Disk radii.
    #[arg(long, value_delimiter = ',', default_values_t = [4.0, 8.0, 16.0])]
    pub radius: Vec<f64>,
    /// Base cells across the diameter; each count gives one row per radius.
    #[arg(long, value_delimiter = ',', default_values_t = [60])]
    pub cells: Vec<usize>,
    /// Subcell refinement factor near the punctures.
    #[arg(long, default_value_t = ffcorr_core::dirac::DEFAULT_REFINE)]
    pub refine: usize,
    #[serde(skip)]
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CumulantArgs {
    /// Momentum `re,im`; repeat for p_1 .. p_{n-1}.
    #[arg(long = "momentum", value_parser = parse_pair, allow_negative_numbers = true, required = true)]
    pub momenta: Vec<[f64; 2]>,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub mu: f64,
    /// Radial quadrature nodes.
    #[arg(long, default_value_t = ffcorr_core::free_field::DEFAULT_RADIAL_NODES)]
    pub nodes: usize,
    /// Angular quadrature nodes.
    #[arg(long, default_value_t = ffcorr_core::free_field::DEFAULT_ANGULAR_NODES)]
    pub inner_nodes: usize,
    #[serde(skip)]
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GffArgs {
    /// Branch configuration TOML.
    #[arg(long)]
    pub config: PathBuf,
    #[serde(skip)]
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DiracArgs {
    /// Branch configuration TOML.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub mu: f64,
    #[arg(long, default_value_t = 4.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 60)]
    pub cells: usize,
    #[arg(long, default_value_t = ffcorr_core::dirac::DEFAULT_REFINE)]
    pub refine: usize,
    /// Also integrate log Z~ over this many mass nodes.
    #[arg(long)]
    pub mass_nodes: Option<usize>,
    #[serde(skip)]
    #[command(flatten)]
    pub common: Common,
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected re,im, got {s:?}"))?;
    let p = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    Ok([p(a)?, p(b)?])
}

/// Failure of a command, with its exit status.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Tolerance(String),
    Io(anyhow::Error),
}

impl Failure {
    pub fn status(&self) -> i32 {
        match self {
            Failure::Usage(_) | Failure::Io(_) => EXIT_USAGE,
            Failure::Tolerance(_) => EXIT_TOLERANCE,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Tolerance(m) => write!(f, "tolerance failure: {m}"),
            Failure::Io(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<ffcorr_core::Error> for Failure {
    fn from(e: ffcorr_core::Error) -> Self {
        use ffcorr_core::Error::*;
        match e {
            Domain(_) | Range { .. } | Insufficient { .. } | Placement(_) | Consistency { .. } => {
                Failure::Usage(e.to_string())
            }
            NonFinite { .. } | Conditioning { .. } | Singular { .. } | Window { .. } | NoConvergence { .. } => {
                Failure::Tolerance(e.to_string())
            }
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Io(e)
    }
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Twopoint(a) => &a.common,
            Command::Onepoint(a) => &a.common,
            Command::Painleve(a) => &a.common,
            Command::Gmc(a) => &a.common,
            Command::TauConvergence(a) => &a.common,
            Command::Cumulant(a) => &a.common,
            Command::Gffcorr(a) => &a.common,
            Command::Dirac(a) => &a.common,
        }
    }

    pub fn run(&self) -> Result<Report, Failure> {
        match self {
            Command::Twopoint(a) => commands::twopoint(a),
            Command::Onepoint(a) => commands::onepoint(a),
            Command::Painleve(a) => commands::painleve(a),
            Command::Gmc(a) => commands::gmc(a),
            Command::TauConvergence(a) => commands::tau_convergence(a),
            Command::Cumulant(a) => commands::cumulant(a),
            Command::Gffcorr(a) => commands::gffcorr(a),
            Command::Dirac(a) => commands::dirac(a),
        }
    }
}

/// Runs a parsed command line and writes its output. Returns the exit status.
pub fn execute(cli: &Cli) -> i32 {
    let start = std::time::Instant::now();
    let report = match cli.command.run() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("ffcorr: {e}");
            return e.status();
        }
    };
    let common = cli.command.common();
    let written = match &common.out {
        Some(path) => std::fs::File::create(path)
            .map_err(anyhow::Error::from)
            .and_then(|f| report.write(common.format, std::io::BufWriter::new(f))),
        None => report.write(common.format, std::io::stdout().lock()),
    };
    if let Err(e) = written {
        eprintln!("ffcorr: {e:#}");
        return EXIT_USAGE;
    }
    eprintln!("ffcorr: {} done in {:.3} s", report.manifest.command, start.elapsed().as_secs_f64());
    for f in &report.manifest.tolerance_flags {
        eprintln!("ffcorr: tolerance flag {f}");
    }
    if report.manifest.tolerance_flags.is_empty() {
        0
    } else {
        EXIT_TOLERANCE
    }
}
