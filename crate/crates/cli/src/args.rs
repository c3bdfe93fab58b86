use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use catpose_core::matching::{Metric, DEFAULT_TOP_K};

#[derive(Debug, Parser)]
#[command(name = "catpose", version, about = "Category-level 6D pose estimation from posed reference views")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Maximum number of queries processed concurrently (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Emit structured JSON log lines on stderr.
    #[arg(long, global = true)]
    pub log_json: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic dataset and write its manifest.
    Synth(SynthArgs),
    /// Select the best reference view for a query and write its matches.
    Match(MatchArgs),
    /// Refine a query pose from its match file.
    Refine(RefineArgs),
    /// Summarize refinement results per category and pooled.
    Eval(EvalArgs),
    /// Match, refine and evaluate every query of a manifest.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory for the manifest and map files.
    #[arg(long)]
    pub out: PathBuf,
    /// Master seed (default 0, or the config's seed).
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON dataset configuration; flags given explicitly override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub refs: Option<usize>,
    #[arg(long)]
    pub queries: Option<usize>,
    /// Descriptor noise standard deviation.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Feature grid cells per side.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub descriptor_dim: Option<usize>,
    /// Largest per-query warp amplitude.
    #[arg(long)]
    pub max_warp: Option<f64>,
    #[arg(long)]
    pub category: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Cosine,
    L2,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Cosine => Metric::Cosine,
            MetricArg::L2 => Metric::L2,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct MatchOpts {
    /// Matches kept per reference view.
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = MetricArg::Cosine)]
    pub metric: MetricArg,
}

#[derive(Debug, Clone, Args)]
pub struct RefineOpts {
    /// JSON optimizer configuration; `--iters` and `--lr` override it.
    #[arg(long)]
    pub optimizer_config: Option<PathBuf>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalOpts {
    /// Rotation thresholds in degrees, ascending.
    #[arg(long, value_delimiter = ',', default_values_t = vec![15.0, 30.0])]
    pub thresholds: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub query: String,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub matching: MatchOpts,
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub query: String,
    /// Directory holding `matches/`; results are written under it.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub refine: RefineOpts,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Required unless `--results` names a records file.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Directory holding `results/` (default: `--out`), or a JSON array of
    /// evaluation records.
    #[arg(long)]
    pub results: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub eval: EvalOpts,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub matching: MatchOpts,
    #[command(flatten)]
    pub refine: RefineOpts,
    #[command(flatten)]
    pub eval: EvalOpts,
}
