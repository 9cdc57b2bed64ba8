mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use approxfp::hw::AreaRule;
use approxfp::MultiplierConfig;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "approxfp", version, about = "Approximate FP32 multiplier laboratory")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Seed for every random stream of the command.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Output file; a `<out>.manifest.json` is written next to it. Stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format (tables default to csv, fronts to json).
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Dataset directory in CIFAR-10 binary layout; the synthetic stand-in is used when unset.
    #[arg(long, global = true, env = "APPROXFP_DATA_DIR")]
    pub data: Option<PathBuf>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    #[serde(skip)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AreaRuleArg {
    DistinctTypes,
    PerSlot,
}

impl From<AreaRuleArg> for AreaRule {
    fn from(a: AreaRuleArg) -> Self {
        match a {
            AreaRuleArg::DistinctTypes => AreaRule::DistinctTypes,
            AreaRuleArg::PerSlot => AreaRule::PerSlot,
        }
    }
}

fn parse_config(s: &str) -> Result<MultiplierConfig, String> {
    s.parse().map_err(|e: approxfp::Error| e.to_string())
}

/// Configuration selection shared by several commands.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ConfigSelection {
    /// Multiplier configuration (exact, pmni, ..., nmcsi); repeatable.
    #[arg(long = "config", value_parser = parse_config)]
    pub configs: Vec<MultiplierConfig>,
    /// All nine configurations.
    #[arg(long, conflicts_with = "configs")]
    pub all: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct NetworkArgs {
    /// Weight file; the built-in fixture network when absent.
    #[arg(long)]
    pub weights: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Error metrics of multiplier configurations over random operand pairs.
    Characterize(CharacterizeArgs),
    /// Hardware cost table with PDP benefit over the exact multiplier.
    Costs(CostsArgs),
    /// CNN accuracy under uniform configurations or a sequence file.
    Evaluate(EvaluateArgs),
    /// NSGA-II search over sequences; writes the final Pareto front.
    Optimize(OptimizeArgs),
    /// Accuracy of seeded random rearrangements of a sequence.
    Permute(PermuteArgs),
    /// Train a reference network and save its weights.
    Train(TrainArgs),
    /// Compressor kind at each (stage, column) of the reduction tree.
    DumpPlacement(DumpPlacementArgs),
    /// Write the synthetic stand-in dataset in CIFAR-10 binary layout.
    SynthData(SynthDataArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CompressorArgs {
    /// Positive-bias compressor truth table file.
    #[arg(long)]
    pub positive_table: Option<PathBuf>,
    /// Negative-bias compressor truth table file.
    #[arg(long)]
    pub negative_table: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CharacterizeArgs {
    #[command(flatten)]
    pub select: ConfigSelection,
    /// Operand pairs per configuration.
    #[arg(long, default_value_t = 400_000)]
    pub n: usize,
    /// PRED tolerance on the relative error; comma separated for several.
    #[arg(long, value_delimiter = ',', default_value = "0.001")]
    pub tau: Vec<f64>,
    #[command(flatten)]
    pub compressors: CompressorArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CostsArgs {
    /// Cost table CSV (config,area_um2,power_uw,delay_ps,pdp_pj); built-in table when absent.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub network: NetworkArgs,
    /// Sequence file `{"slots": [...]}`.
    #[arg(long, conflicts_with_all = ["configs", "all"])]
    pub seq: Option<PathBuf>,
    #[command(flatten)]
    pub select: ConfigSelection,
    /// Test images to score.
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = AreaRuleArg::DistinctTypes)]
    pub area_rule: AreaRuleArg,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub network: NetworkArgs,
    /// Number of allowed multiplier types, taken from the accuracy ranking.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 50)]
    pub pop: usize,
    #[arg(long, default_value_t = 40)]
    pub gens: usize,
    #[arg(long, default_value_t = 0.9)]
    pub crossover: f64,
    /// Per-slot mutation probability [default: 2/198].
    #[arg(long)]
    pub mutation: Option<f64>,
    /// Images per fitness evaluation during the search.
    #[arg(long, default_value_t = 500)]
    pub eval_subset: usize,
    /// Images for re-scoring the final front; 0 skips it.
    #[arg(long, default_value_t = 2000)]
    pub final_n: usize,
    /// Optimize hardware cost only (accuracy loss fixed at 0).
    #[arg(long)]
    pub hw_only: bool,
    /// Cache fitness per concrete ordering rather than per multiset.
    #[arg(long)]
    pub order_sensitive: bool,
    #[arg(long, value_enum, default_value_t = AreaRuleArg::DistinctTypes)]
    pub area_rule: AreaRuleArg,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PermuteArgs {
    #[command(flatten)]
    pub network: NetworkArgs,
    /// Source sequence file.
    #[arg(long)]
    pub seq: PathBuf,
    /// Number of variants.
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// Test images per variant.
    #[arg(long, default_value_t = 2000)]
    pub images: usize,
    #[arg(long, value_enum, default_value_t = AreaRuleArg::DistinctTypes)]
    pub area_rule: AreaRuleArg,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 6)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    #[arg(long, default_value_t = 0.8)]
    pub lr_decay: f64,
    /// Use only the first N training images.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Synthetic training images when no dataset directory is given.
    #[arg(long, default_value_t = 10_000)]
    pub synthetic_n: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DumpPlacementArgs {
    #[command(flatten)]
    pub select: ConfigSelection,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthDataArgs {
    /// Images per training batch file (five files).
    #[arg(long, default_value_t = 2000)]
    pub per_batch: usize,
    /// Images in the test batch file.
    #[arg(long, default_value_t = 2000)]
    pub test: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
