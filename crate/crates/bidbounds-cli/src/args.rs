//! The command-line surface.
//!
//! Ten subcommands share a small vocabulary: `--grid-h H` (or `--values`
//! and `--bids` level specifications) fixes the analysis grid, `--data`
//! names a bid CSV whose bids already sit on that grid, `--tol` is the row
//! tolerance of the feasibility programs, `--delta`/`--alpha` are
//! confidence levels, and `--out` is a directory that receives result
//! tables plus a `manifest.json` recording every parameter. Exit codes:
//! 0 success, 2 refutation (an identified set came back empty, which is a
//! finding, not a failure), 1 error.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::prep::Rounding;

#[derive(Debug, Parser)]
#[command(
    name = "bidbounds",
    version,
    about = "Identified sets, moment and counterfactual bounds, and \
             resampling inference for discrete auction bid data",
    after_help = "Exit codes: 0 success, 2 refutation (empty identified \
                  set), 1 error.\nThe BIDBOUNDS_THREADS environment \
                  variable is validated and reserved; the solver is \
                  single-threaded."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Membership and moment queries on observed bid data
    Identify(IdentifyArgs),
    /// Sweep a parametric family for the set consistent with the data
    ParametricSet(ParametricSetArgs),
    /// Bound a welfare metric under an alternative auction rule
    Counterfactual(CounterfactualArgs),
    /// Run a generate/sample/estimate experiment from a config file
    McRun(McRunArgs),
    /// Per-parameter infeasibility heatmap grid as CSV
    Heatmap(HeatmapArgs),
    /// Prepare raw dollar auction records for the analysis grid
    OcsPrep(OcsPrepArgs),
    /// Compare closed-form mean bounds with the sharp program
    BbmCompare(BbmCompareArgs),
    /// Bayesian-bootstrap copies of a set or moment interval
    Bootstrap(BootstrapArgs),
    /// Subsampling confidence set for a parametric family
    Subsample(SubsampleArgs),
    /// Test consistency with symmetric independent private values
    SymmetryTest(SymmetryTestArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    /// Winner pays own bid
    First,
    /// Winner pays the highest opposing bid
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    /// Common value: one value shared by all bidders
    Cv,
    /// Private values: a joint value profile
    Pv,
    /// Symmetric independent private values
    Ipv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MomentArg {
    /// E[v]
    Mean,
    /// E[v^2]
    Second,
}

/// Grid and pricing-rule flags shared by the analysis commands.
#[derive(Debug, Args)]
pub struct GridArgs {
    /// Integer grid 0..=H for both values and bids
    #[arg(long = "grid-h", conflicts_with_all = ["values", "bids"])]
    pub grid_h: Option<usize>,
    /// Value levels, `lo:hi:step` or a comma list
    #[arg(long, requires = "bids")]
    pub values: Option<String>,
    /// Bid levels, `lo:hi:step` or a comma list
    #[arg(long, requires = "values")]
    pub bids: Option<String>,
    /// Number of bidders per auction
    #[arg(long, default_value_t = 2)]
    pub players: usize,
    /// Pricing rule of the observed auctions
    #[arg(long, value_enum, default_value_t = RuleArg::First)]
    pub rule: RuleArg,
}

#[derive(Debug, Args)]
pub struct IdentifyArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    /// Bid data CSV (auction_id, bidder_id, bid on the grid)
    #[arg(long)]
    pub data: PathBuf,
    /// Consistency notion to query under
    #[arg(long, value_enum, default_value_t = ModelArg::Cv)]
    pub model: ModelArg,
    /// Candidate distribution: a value-grid mass list for cv, a marginal
    /// (or per-player `;`-separated marginals) for ipv/pv
    #[arg(long)]
    pub pi: Option<String>,
    /// Row tolerance of the feasibility program
    #[arg(long, default_value_t = 0.0)]
    pub tol: f64,
    /// Moment to bound
    #[arg(long, value_enum, default_value_t = MomentArg::Mean)]
    pub moment: MomentArg,
    /// Confidence level: widen the cv moment interval to a finite-sample
    /// confidence interval
    #[arg(long)]
    pub delta: Option<f64>,
    /// Directory for result files
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the queried feasibility program in LP text format
    #[arg(long = "lp-dump")]
    pub lp_dump: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ParametricSetArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub data: PathBuf,
    /// truncated_normal, truncated_poisson, binomial, or truncated_geometric
    #[arg(long)]
    pub family: String,
    /// Row tolerance of the grid sweep
    #[arg(long, default_value_t = 0.0, conflicts_with = "delta")]
    pub tol: f64,
    /// Confidence level: use the finite-sample row tolerance instead of --tol
    #[arg(long)]
    pub delta: Option<f64>,
    /// Keep every k-th point of the default parameter grid
    #[arg(long = "theta-stride", default_value_t = 1)]
    pub theta_stride: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CounterfactualArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub data: PathBuf,
    /// Pricing rule of the counterfactual auction
    #[arg(long = "alt-rule", value_enum)]
    pub alt_rule: RuleArg,
    /// Metric to bound: `revenue`, `welfare`, or `constant:X`
    #[arg(long, default_value = "revenue")]
    pub metric: String,
    #[arg(long, default_value_t = 0.0)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct McRunArgs {
    /// Experiment configuration, TOML
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub family: String,
    #[arg(long = "theta-stride", default_value_t = 1)]
    pub theta_stride: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OcsPrepArgs {
    /// Raw dollar bid data CSV
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Keep only auctions with exactly this many bids
    #[arg(long, default_value_t = 2)]
    pub bidders: usize,
    /// Divide bids by the acreage column before anything else
    #[arg(long = "per-acre")]
    pub per_acre: bool,
    /// Drop auctions containing a normalized bid above this many dollars
    #[arg(long, default_value_t = 20_000.0)]
    pub threshold: f64,
    /// Value-grid size; bids scale onto 0..=ceil(H/2)
    #[arg(long = "grid-h", default_value_t = 200)]
    pub grid_h: usize,
    /// Rounding rule onto integer levels
    #[arg(long, value_enum, default_value_t = Rounding::Nearest)]
    pub rounding: Rounding,
    /// Seed for the random bidder-to-slot assignment
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct BbmCompareArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BootstrapArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub data: PathBuf,
    /// With a family: bootstrap the parameter set; without: the mean interval
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long = "theta-stride", default_value_t = 1)]
    pub theta_stride: usize,
    /// Number of bootstrap draws
    #[arg(long, default_value_t = 100)]
    pub draws: usize,
    /// Row tolerance applied to every draw
    #[arg(long, default_value_t = 0.0)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SubsampleArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub family: String,
    #[arg(long = "theta-stride", default_value_t = 1)]
    pub theta_stride: usize,
    /// Confidence level of the cutoff
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Number of subsamples
    #[arg(long = "n-sub", default_value_t = 50)]
    pub n_sub: usize,
    /// Subsample size as a fraction of the sample
    #[arg(long = "sub-frac", default_value_t = 0.25)]
    pub sub_frac: f64,
    /// Explicit subsample size, overriding --sub-frac
    #[arg(long = "sub-size")]
    pub sub_size: Option<usize>,
    /// Cutoff refinement rounds
    #[arg(long = "refine-rounds", default_value_t = 2)]
    pub refine_rounds: usize,
    /// Row tolerance defining the preliminary set
    #[arg(long, default_value_t = 0.0)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SymmetryTestArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub data: PathBuf,
    /// Tolerance below which the model is not refuted
    #[arg(long, default_value_t = 0.0)]
    pub tol: f64,
}
