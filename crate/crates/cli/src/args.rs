use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "graspsense",
    version,
    about = "Simulated audio/tactile container sensing, slip prediction and reactive grip control"
)]
pub struct Cli {
    /// Base seed for data, training, episodes and probes.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory (required by every subcommand).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// TOML run configuration; flags given on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Log progress to stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a split trial dataset into --out.
    Generate(GenerateArgs),
    /// Train the material classifier and/or slip predictors into --out.
    Train(TrainArgs),
    /// Run closed-loop grip episodes and write their logs into --out.
    Episode(EpisodeArgs),
    /// Identify contents by active probing, EIG against random selection.
    Active(ActiveArgs),
    /// Score stored models on a dataset's test split.
    Eval(EvalArgs),
}

#[derive(Debug, Args, serde::Serialize)]
pub struct GenerateArgs {
    /// Trials per (motion, material) cell.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Hold the base grip in every trial instead of varying it.
    #[arg(long)]
    pub fixed_grip: bool,
    /// Write into a non-empty output directory.
    #[arg(long)]
    pub overwrite: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classifier,
    Predictor,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScopeArg {
    Default,
    Material,
    All,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct TrainArgs {
    /// Dataset directory written by `generate`.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = Task::All)]
    pub task: Task,
    /// Predictor scope to train and save.
    #[arg(long, value_enum)]
    pub scope: Option<ScopeArg>,
    /// Restrict material predictors to one material.
    #[arg(long)]
    pub material: Option<String>,
    /// Restrict predictors to one motion.
    #[arg(long)]
    pub motion: Option<String>,
    /// Train the classifier without augmented segments.
    #[arg(long)]
    pub no_augment: bool,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct EpisodeArgs {
    /// Directory with the classifier and predictors (reactive policy only).
    #[arg(long)]
    pub models: Option<PathBuf>,
    /// Container contents; cycles through all materials when omitted.
    #[arg(long)]
    pub material: Option<String>,
    #[arg(long, default_value = "shaking")]
    pub motion: String,
    /// `reactive` or `fixed:<torque Nm>`.
    #[arg(long, default_value = "reactive")]
    pub policy: String,
    /// Episodes with seeds seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    pub episodes: usize,
    /// Print a table of the episode summaries.
    #[arg(long)]
    pub summary: bool,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct ActiveArgs {
    /// Directory with the classifier and likelihood model.
    #[arg(long)]
    pub models: PathBuf,
    /// True contents; cycles through all materials when omitted.
    #[arg(long)]
    pub material: Option<String>,
    /// Posterior maximum that ends a run.
    #[arg(long, default_value_t = 0.95)]
    pub confidence: f64,
    #[arg(long, default_value_t = 20)]
    pub max_segments: usize,
    /// Matched runs with seeds seed, seed+1, ...
    #[arg(long, default_value_t = 50)]
    pub seeds: usize,
    /// Print a per-seed table.
    #[arg(long)]
    pub summary: bool,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub models: PathBuf,
}
