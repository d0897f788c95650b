mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::KindName;
use crate::error::CliError;
use crate::output::Format;

/// Hausdorff dimensions of non-stationary Moran fractals driven by digit
/// statistics of number expansions.
#[derive(Debug, Parser)]
#[command(name = "moran", version)]
pub struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Tolerance for root finding and series tails.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Starting precision for digit extraction.
    #[arg(long = "precision-bits", global = true)]
    pub precision_bits: Option<u32>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    #[arg(long, value_enum)]
    pub kind: Option<KindName>,
    /// Base for m-ary and Bolyai–Rényi expansions.
    #[arg(long)]
    pub m: Option<u64>,
    /// β, e.g. `golden`, `5/2`, `quad:1,1,5,2`.
    #[arg(long)]
    pub beta: Option<String>,
    /// Point to expand, e.g. `sqrt2-1`, `1/3`, `0.1`.
    #[arg(long)]
    pub x: Option<String>,
    /// Number of digits.
    #[arg(long)]
    pub n: Option<usize>,
    /// Read digits from a sequence file instead of expanding.
    #[arg(long, conflicts_with_all = ["kind", "x"])]
    pub sequence: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Digits of x under an f-expansion.
    Expand(SourceArgs),
    /// Digit counts, frequencies and stabilization indices.
    Stats(SourceArgs),
    /// Pressure P(t) on a list or grid of t values.
    Pressure {
        /// Comma-separated t values.
        #[arg(long, value_delimiter = ',', required_unless_present = "grid")]
        t: Vec<f64>,
        /// `start,end,count`.
        #[arg(long, value_delimiter = ',', num_args = 1, conflicts_with = "t")]
        grid: Option<Vec<f64>>,
    },
    /// Zero h of the pressure.
    #[command(name = "solve-h")]
    SolveH {
        /// Also report a certified enclosure of h.
        #[arg(long)]
        bounds: bool,
    },
    /// Dimensions h_M of the M-generator truncations.
    Ladder {
        #[arg(long = "M", value_delimiter = ',', required = true)]
        m: Vec<usize>,
    },
    /// Closed-form and Monte Carlo dimensions.
    #[command(subcommand)]
    Dim(DimCommand),
    /// Invariant densities.
    #[command(subcommand)]
    Measures(MeasureCommand),
    /// Realize the truncated construction as nested intervals.
    Realize {
        #[arg(long)]
        depth: usize,
        /// Ratios kept per family.
        #[arg(long = "M", default_value_t = 8)]
        m: usize,
        #[arg(long)]
        no_rescale: bool,
    },
    /// Box counts of the leaf intervals of a realized tree.
    Boxcount {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
    },
    /// δ(x; k, n) from the digit-count families of a driving sequence.
    #[command(name = "tilde-dim")]
    TildeDim {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        k: usize,
        /// Terms kept per family.
        #[arg(long = "terms")]
        terms: usize,
        /// Also enclose the untruncated value.
        #[arg(long)]
        full: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum DimCommand {
    /// Besicovitch–Eggleston dimension for m-ary digit frequencies.
    Besicovitch {
        #[arg(long)]
        m: u64,
        #[arg(long, value_delimiter = ',', required = true)]
        p: Vec<f64>,
    },
    /// Dimension of the β-expansion frequency set.
    Beta {
        #[arg(long)]
        beta: String,
        #[arg(long, value_delimiter = ',', required = true)]
        p: Vec<f64>,
    },
    /// Kinney–Pitcher dimension for i.i.d. continued-fraction digits.
    Kp {
        /// Law of digits 1, 2, …; the config frequency vector otherwise.
        #[arg(long, value_delimiter = ',')]
        p: Option<Vec<f64>>,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum MeasureCommand {
    /// Parry density of T_β.
    Parry {
        #[arg(long)]
        beta: String,
        #[arg(long, default_value_t = 1024)]
        grid: usize,
    },
    /// Gauss density on a grid.
    Gauss {
        #[arg(long, default_value_t = 1024)]
        grid: usize,
    },
    /// Ulam approximation of the invariant density.
    Ulam {
        #[arg(long, value_enum)]
        kind: KindName,
        #[arg(long)]
        m: Option<u64>,
        #[arg(long)]
        beta: Option<String>,
        #[arg(long, default_value_t = 1024)]
        n: usize,
        #[arg(long, default_value_t = 10_000)]
        max_iter: usize,
        /// Equilibrium state of the potential −s·log|T′| instead of the acim.
        #[arg(long)]
        scaled: Option<f64>,
    },
}

fn fail(e: &CliError) -> ExitCode {
    let report = serde_json::to_string(&e.report()).expect("serializable");
    eprintln!("{report}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            return fail(&CliError::config(e.to_string().trim().to_string()));
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
