//! `polytope`: command-line experiments on polytope partitions of small
//! ReLU networks.

mod commands;
mod parse;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "polytope", version, about = "Polytope-partition experiments on small ReLU networks")]
struct Cli {
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a Gaussian-blob classification dataset.
    GenData(GenDataArgs),
    /// Initialize and train a network.
    Train(TrainArgs),
    /// Print the spline code of one point.
    Code(CodeArgs),
    /// Intra- versus inter-class boundary density.
    Density(DensityArgs),
    /// Density gap for every span start.
    LayerGap(LayerGapArgs),
    /// Boundary crossings along a linear or spherical path.
    Interpolate(InterpolateArgs),
    /// Local density along a scaled hidden activation.
    Sweep(SweepArgs),
    /// Boundary heatmap on the plane through three anchors.
    Slice(SliceArgs),
    /// DBSCAN on activations or spline codes.
    Cluster(ClusterArgs),
    /// Non-negative factorization of hidden activations.
    Nmf(NmfArgs),
    /// Exhaustive lattice ground truth for tiny networks.
    Oracle {
        #[command(subcommand)]
        command: OracleCommand,
    },
    /// Welch's t-test and bootstrap intervals on CSV columns.
    Stats {
        #[command(subcommand)]
        command: StatsCommand,
    },
    /// Seeded end-to-end run of all three predictions.
    Repro(ReproArgs),
}

#[derive(Args)]
pub struct GenDataArgs {
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    #[arg(long, default_value_t = 100)]
    pub per_class: usize,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 1.0)]
    pub spread: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Layer widths, input first, e.g. `2,16,16,3`.
    #[arg(long, default_value = "2,16,16,16,3")]
    pub sizes: String,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SpanArg {
    /// Span start layer L and extra layer count K.
    #[arg(long, num_args = 2, value_names = ["L", "K"])]
    pub span: Option<Vec<usize>>,
}

#[derive(Args)]
pub struct CodeArgs {
    #[arg(long)]
    pub net: PathBuf,
    /// Point in the span's input space, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub input: String,
    #[arg(long, num_args = 2, value_names = ["L", "K"], required = true)]
    pub span: Vec<usize>,
}

#[derive(Args)]
pub struct DensityArgs {
    #[arg(long)]
    pub net: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub span: SpanArg,
    #[arg(long, default_value_t = 2000)]
    pub max_pairs: usize,
    #[arg(long, default_value_t = 10_000)]
    pub resamples: usize,
    #[arg(long, default_value_t = 0.99)]
    pub level: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct LayerGapArgs {
    #[arg(long)]
    pub net: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub max_pairs: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct InterpolateArgs {
    #[arg(long)]
    pub net: PathBuf,
    #[command(flatten)]
    pub span: SpanArg,
    /// Start point in the span's input space.
    #[arg(long, allow_hyphen_values = true)]
    pub from: String,
    #[arg(long, allow_hyphen_values = true)]
    pub to: String,
    /// Map `--from`/`--to` from network input space to the span's input space.
    #[arg(long)]
    pub from_inputs: bool,
    #[arg(long, default_value = "linear")]
    pub mode: String,
    #[arg(long, default_value_t = 256)]
    pub samples: usize,
    /// Also estimate local density at each sample with this many probes.
    #[arg(long)]
    pub local_samples: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    pub radius_fraction: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub net: PathBuf,
    /// Scaled activation is the input of this layer.
    #[arg(long)]
    pub layer: usize,
    /// Network input whose activation is scaled.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "noise")]
    pub input: Option<String>,
    /// Scale a Gaussian direction matched to the activations of `--reference`.
    #[arg(long, requires = "reference")]
    pub noise: bool,
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// `lo:hi:n` or a comma list.
    #[arg(long, default_value = "0:4:41")]
    pub alphas: String,
    #[arg(long, default_value_t = 150)]
    pub samples: usize,
    #[arg(long, default_value_t = 0.05, conflicts_with = "radius")]
    pub radius_fraction: f64,
    /// Fixed probe radius at every α.
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SliceArgs {
    #[arg(long)]
    pub net: PathBuf,
    /// CSV with a header and three rows.
    #[arg(long)]
    pub anchors: PathBuf,
    /// Anchors are network inputs; map them to the span's input space.
    #[arg(long)]
    pub from_inputs: bool,
    #[command(flatten)]
    pub span: SpanArg,
    #[arg(long, default_value_t = 512)]
    pub res: usize,
    #[arg(long, default_value_t = 2.0)]
    pub sigma: f64,
    #[arg(long, default_value = "log1p")]
    pub scale: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub net: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Cluster the input of this layer (codes use span `layer..output`).
    #[arg(long, default_value_t = 1)]
    pub layer: usize,
    #[arg(long, default_value = "euclidean")]
    pub metric: String,
    #[arg(long, conflicts_with = "eps_fraction")]
    pub eps: Option<f64>,
    /// `eps` as a fraction of the median pairwise distance.
    #[arg(long, default_value_t = 0.5)]
    pub eps_fraction: f64,
    #[arg(long, default_value_t = 5)]
    pub min_pts: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct NmfArgs {
    #[arg(long)]
    pub net: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub layer: usize,
    #[arg(long, default_value_t = 64)]
    pub k: usize,
    #[arg(long, default_value_t = 500)]
    pub iters: usize,
    /// Subtract the global minimum first when entries are negative.
    #[arg(long)]
    pub shift_to_min: bool,
    /// `labels.csv` from `polytope cluster`, for per-cluster cosine histograms.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub net: PathBuf,
    #[command(flatten)]
    pub span: SpanArg,
    /// `lo:hi` for every axis, or one `lo:hi` per axis separated by commas.
    #[arg(long, allow_hyphen_values = true, default_value = "-2:2")]
    pub bounds: String,
    #[arg(long, default_value_t = 256)]
    pub res: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Subcommand)]
pub enum OracleCommand {
    /// Distinct codes on the lattice, with representatives and counts.
    Enumerate(OracleArgs),
    /// Check every lattice point against its region's affine map.
    Verify {
        #[command(flatten)]
        args: OracleArgs,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Regions that meet across lattice-adjacent points.
    Adjacency(OracleArgs),
}

#[derive(Subcommand)]
pub enum StatsCommand {
    Welch(WelchArgs),
    Bootstrap(BootstrapArgs),
}

#[derive(Args)]
pub struct WelchArgs {
    #[arg(long)]
    pub a: PathBuf,
    /// Column name or position.
    #[arg(long, default_value = "0")]
    pub a_col: String,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, default_value = "0")]
    pub b_col: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct BootstrapArgs {
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long, default_value = "0")]
    pub col: String,
    #[arg(long, default_value = "mean")]
    pub statistic: String,
    #[arg(long, default_value_t = 0.99)]
    pub level: f64,
    #[arg(long, default_value_t = 10_000)]
    pub resamples: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReproArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Exit with status 1 when any check fails.
    #[arg(long)]
    pub strict: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::GenData(a) => commands::gen_data(a),
        Command::Train(a) => commands::train(a),
        Command::Code(a) => commands::code(a),
        Command::Density(a) => commands::density(a),
        Command::LayerGap(a) => commands::layer_gap(a),
        Command::Interpolate(a) => commands::interpolate(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Slice(a) => commands::slice(a),
        Command::Cluster(a) => commands::cluster(a),
        Command::Nmf(a) => commands::nmf(a),
        Command::Oracle { command } => commands::oracle(command),
        Command::Stats { command } => commands::stats(command),
        Command::Repro(a) => commands::repro(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}
