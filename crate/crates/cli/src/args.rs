use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fairvote::ensemble::TieBreak;
use fairvote::evaluation::{BaselineSelection, TGrid};
use fairvote::fairfit::ConstraintKind;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "fairvote", version, about = "Fairness-constrained majority-vote ensembles")]
pub struct Cli {
    /// Worker threads; 0 uses every core. Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one constrained member per fold and write the ensemble.
    Fit(FitArgs),
    /// Majority-vote predictions of a fitted ensemble.
    Predict(PredictArgs),
    /// Competence curves and error-improvement bounds.
    Diagnose(DiagnoseArgs),
    /// Fairness-accuracy frontier and FairAUC with a bootstrap interval.
    Fairauc(FairaucArgs),
    /// Smallest validation recall that certifies a test recall floor.
    Samplesize(SamplesizeArgs),
    /// Write a seeded synthetic score table.
    Simulate(SimulateArgs),
    /// Re-run a recorded command and check that outputs are reproduced.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitArg {
    Train,
    Validation,
    Test,
    All,
}

impl SplitArg {
    pub fn split(self) -> Option<fairvote::dataio::Split> {
        use fairvote::dataio::Split;
        match self {
            SplitArg::Train => Some(Split::Train),
            SplitArg::Validation => Some(Split::Validation),
            SplitArg::Test => Some(Split::Test),
            SplitArg::All => None,
        }
    }
}

/// Options shared by every command that fits ensembles.
#[derive(Debug, Clone, Args, Serialize)]
pub struct FitOptions {
    #[arg(long, default_value = "min-recall")]
    pub constraint: ConstraintKind,
    /// Recall floor or largest allowed gap; not used with `none`.
    #[arg(long)]
    pub bound: Option<f64>,
    /// Number of folds; defaults to (and must equal) the number of members.
    #[arg(long)]
    pub folds: Option<usize>,
    /// Grid points per group weight (odd).
    #[arg(long, default_value_t = 101)]
    pub grid_resolution: usize,
    /// Weights range over [-R, R].
    #[arg(long, default_value_t = 1.0)]
    pub grid_range: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "positive")]
    pub tie_break: TieBreak,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[command(flatten)]
    pub fit: FitOptions,
    /// Ensemble JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the `sample_id,fold` assignment.
    #[arg(long)]
    pub folds_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub ensemble: PathBuf,
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    pub split: SplitArg,
    /// Predictions CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub ensemble: PathBuf,
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    /// Comma-separated: all, positives, negatives, group-positives, group-negatives.
    #[arg(long, default_value = "all,positives,negatives,group-positives,group-negatives")]
    pub restrictions: String,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FairaucArgs {
    #[arg(long)]
    pub scores: PathBuf,
    /// Fitted ensembles to place on the frontier (repeatable).
    #[arg(long)]
    pub ensemble: Vec<PathBuf>,
    /// Comma-separated bounds; fits one ensemble per bound.
    #[arg(long)]
    pub sweep: Option<String>,
    #[command(flatten)]
    pub fit: FitOptions,
    #[arg(long, default_value = "0.5:1:51")]
    pub t_grid: TGrid,
    #[arg(long, default_value_t = fairvote::evaluation::DEFAULT_BOOTSTRAP)]
    pub bootstrap_n: usize,
    #[arg(long, default_value_t = fairvote::evaluation::DEFAULT_LEVEL)]
    pub bootstrap_level: f64,
    /// Global-threshold baseline thresholds as start:end:count within [0, 1].
    #[arg(long)]
    pub baseline_thresholds: Option<String>,
    /// Member whose task scores feed the baseline.
    #[arg(long, default_value_t = 0)]
    pub baseline_member: usize,
    #[arg(long, default_value = "validation")]
    pub select: BaselineSelection,
    /// FairAUC report (JSON); frontiers go to `<out>.frontier.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SamplesizeArgs {
    /// Validation positives in the group.
    #[arg(long)]
    pub m: u64,
    /// Test positives in the group.
    #[arg(long)]
    pub n: u64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Recall floor to certify.
    #[arg(long)]
    pub k: f64,
    /// Write the block here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelArg {
    Latent,
    Bernoulli,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// Full generator configuration (JSON); replaces the model flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = fairvote::ensemble::DEFAULT_MEMBERS)]
    pub members: usize,
    #[arg(long, default_value = "a,b")]
    pub groups: String,
    /// `neg:pos` per group, comma-separated.
    #[arg(long, default_value = "200:100,20:10")]
    pub counts: String,
    #[arg(long, value_enum, default_value = "latent")]
    pub model: ModelArg,
    /// Latent model: mean positive score per group.
    #[arg(long, default_value = "0.65,0.52")]
    pub pos_mean: String,
    /// Latent model: mean negative score per group.
    #[arg(long, default_value = "0.35,0.35")]
    pub neg_mean: String,
    #[arg(long, default_value_t = 0.15)]
    pub spread: f64,
    /// Bernoulli model: probability a member is right, per group.
    #[arg(long, default_value = "0.7,0.6")]
    pub correct: String,
    /// Shared-noise correlation between members.
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.2)]
    pub group_noise: f64,
    #[arg(long, default_value_t = 0.3)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = 0.0)]
    pub validation_fraction: f64,
    /// Overrides the seed of `--config` when both are given.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Drop labels of test samples, as for deployment data.
    #[arg(long)]
    pub unlabeled_test: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}
