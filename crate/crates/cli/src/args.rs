//! Flag definitions. Every value flag is optional so that a `--config` file
//! can supply it; defaults are applied when the command resolves its
//! settings.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use difflab::{DatasetKind, LossForm, TargetSpace};

#[derive(Debug, Parser)]
#[command(
    name = "difflab",
    version,
    about = "Diffusion-model experiments on 2D point clouds"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a normalised synthetic point cloud.
    GenData(GenDataArgs),
    /// Train one denoiser and write its checkpoint and run CSVs.
    Train(TrainArgs),
    /// Draw samples from a trained checkpoint.
    Sample(SampleArgs),
    /// Score a checkpoint and a sample file against test points.
    Eval(EvalArgs),
    /// Train, sample and score every (dataset, seed, form, space) cell.
    Sweep(SweepArgs),
    /// Render a CSV (or the analytic weight curves) as an SVG chart.
    Plot(PlotArgs),
}

/// `lo,hi` box for clipping data estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipRange(pub f64, pub f64);

impl FromStr for ClipRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (lo, hi) = s
            .split_once(',')
            .ok_or_else(|| format!("expected 'lo,hi', got '{s}'"))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| format!("bad bound '{v}': {e}"))
        };
        let (lo, hi) = (parse(lo)?, parse(hi)?);
        if !(lo < hi) {
            return Err(format!("clip range needs lo < hi, got {lo},{hi}"));
        }
        Ok(ClipRange(lo, hi))
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub kind: Option<DatasetKind>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Settings shared by `train` and `sweep`.
#[derive(Debug, Clone, Default, Args)]
pub struct TrainingFlags {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub t_min: Option<f64>,
    /// Draws per test point for the per-epoch evaluation.
    #[arg(long)]
    pub eval_draws: Option<usize>,
    /// Hidden layer width of the denoiser.
    #[arg(long)]
    pub width: Option<usize>,
    /// Number of uniform timestep bins in bins.csv.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Points generated per dataset (before the train/test split).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub space: Option<TargetSpace>,
    #[arg(long)]
    pub form: Option<LossForm>,
    #[arg(long)]
    pub dataset: Option<DatasetKind>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub training: TrainingFlags,
    /// Train on this point CSV instead of a generated dataset.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory for model.bin, epochs.csv and bins.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub clip: Option<ClipRange>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Held-out points: the loss reference and the moment reference.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Generated points to compare against the test points.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    /// Metrics CSV; the row is appended.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Dataset label written to the metrics row.
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long)]
    pub t_min: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub spaces: Option<Vec<TargetSpace>>,
    #[arg(long, value_delimiter = ',')]
    pub forms: Option<Vec<LossForm>>,
    #[arg(long, value_delimiter = ',')]
    pub datasets: Option<Vec<DatasetKind>>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[command(flatten)]
    pub training: TrainingFlags,
    /// Sampling steps per cell.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Samples drawn per cell.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub clip: Option<ClipRange>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// scatter, epochs, bins or scaling.
    #[arg(long)]
    pub kind: Option<String>,
    /// Input CSVs (not used by `scaling`).
    #[arg(long = "input", num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// epochs.csv column(s) to draw (default train_loss).
    #[arg(long, value_delimiter = ',')]
    pub columns: Option<Vec<String>>,
    /// Epoch whose bins are drawn (default: last).
    #[arg(long)]
    pub epoch: Option<usize>,
    #[arg(long)]
    pub log_y: bool,
    /// `scaling`: also write the plotted values as CSV.
    #[arg(long)]
    pub data_out: Option<PathBuf>,
    #[arg(long)]
    pub title: Option<String>,
}
