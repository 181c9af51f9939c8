mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "latent-twd",
    version,
    about = "Tree-Wasserstein distances on decoded feature trees"
)]
pub struct Cli {
    /// Worker threads; defaults to all available cores.
    #[arg(long, global = true, env = "LATENT_TWD_THREADS")]
    pub threads: Option<usize>,

    /// JSON file with pipeline settings; explicit flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct PipelineArgs {
    /// Kernel bandwidth as a multiple of the median feature distance [default: 2].
    #[arg(long)]
    pub epsilon_factor: Option<f64>,
    /// Finest dyadic scale K_c, 0..=19 [default: 7].
    #[arg(long)]
    pub max_scale: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Use a landmark operator with m^tau landmarks.
    #[arg(long)]
    pub landmark_tau: Option<f64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormatArg {
    Csv,
    Tsv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Decode a feature tree from a samples × features matrix and write Newick.
    TreeBuild {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Input table format; inferred from the extension when omitted.
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        /// Also write the operator's eigenvalues to this CSV.
        #[arg(long)]
        spectrum: Option<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Pairwise tree-Wasserstein distances between the rows of a matrix.
    Dist {
        #[arg(long)]
        input: PathBuf,
        /// Newick tree whose leaves are the matrix columns.
        #[arg(long, required_unless_present = "single_scale")]
        tree: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        /// Decode a tree from scale k alone instead of reading one.
        #[arg(long, conflicts_with = "tree")]
        single_scale: Option<usize>,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Generate a synthetic data set with its ground-truth tree.
    Synth {
        #[arg(value_enum)]
        kind: SynthKind,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory receiving X.csv, labels.csv and truth.nwk.
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
    },
    /// kNN classification accuracy from a distance matrix and labels.
    EvalKnn {
        #[arg(long)]
        dist: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Report CSV; a text summary goes next to it with a .txt extension.
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = latent_twd::eval::DEFAULT_KS)]
        ks: Vec<usize>,
        #[arg(long, default_value_t = latent_twd::eval::DEFAULT_SPLIT)]
        split: f64,
        #[arg(long, default_value_t = latent_twd::eval::DEFAULT_REPEATS)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Exact reference computations, printed to standard output.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Rerun one of the built-in experiments.
    #[command(subcommand)]
    Repro(ReproCommand),
    /// Time single TWD evaluations on random trees of growing size.
    Bench {
        /// Leaf counts; defaults to 2^8 .. 2^14.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long, default_value_t = 64)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    HierDocs,
    TreeGauss,
}

#[derive(Subcommand, Debug)]
pub enum OracleCommand {
    /// Exact optimal transport cost for a cost matrix and two marginals.
    Ot {
        #[arg(long)]
        cost: PathBuf,
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
    },
    /// Tree-Wasserstein distance with mass on any node of a Newick tree.
    TwRef {
        #[arg(long)]
        tree: PathBuf,
        /// Vectors as `name,value` lines (matched to node names) or one value per node.
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        /// Also solve the same problem as OT under the tree's path metric.
        #[arg(long)]
        check_ot: bool,
    },
}

#[derive(Subcommand, Debug)]
pub enum ReproCommand {
    /// kNN accuracy on the produce documents.
    SyntheticDocs {
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = latent_twd::eval::DEFAULT_REPEATS)]
        repeats: usize,
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Discrepancy between decoded-tree TWD and the true tree's TW as n grows.
    ToyRecovery {
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long, default_value_t = 5)]
        seeds: usize,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
