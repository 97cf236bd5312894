use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Learn to predict radar Doppler spectrograms from motion-capture markers.
#[derive(Debug, Parser)]
#[command(name = "mocap-doppler", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// TOML file with [preprocess], [model] and [train] sections.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for synthesis, initialisation, shuffling and dropout.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    #[arg(long, global = true)]
    pub batch: Option<usize>,
    /// Model variant: s (spatial only), t (temporal only) or st (both).
    #[arg(long, global = true)]
    pub variant: Option<String>,
    /// Directory used for outputs whose path is not given.
    #[arg(long, global = true, env = "MOCAP_DOPPLER_DATA", default_value = "data")]
    pub data_dir: PathBuf,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate paired MoCap and radar recordings.
    Synth(SynthArgs),
    /// Align, window and transform recordings into a pairs container.
    Preprocess(PreprocessArgs),
    /// Train a model on a pairs container.
    Train(TrainArgs),
    /// Train the S, T and S+T variants over several seeds and compare.
    Ablate(AblateArgs),
    /// Predict spectrogram rows for a MoCap recording.
    Infer(InferArgs),
    /// Draw a spectrogram, pairs container or run log as a PGM image.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Recipe TOML; builtin gait recipe when omitted.
    #[arg(long)]
    pub recipe: Option<PathBuf>,
    /// Overrides the recipe's scene kind.
    #[arg(long)]
    pub scene: Option<String>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub markers: Option<usize>,
    /// Output directory [default: <data-dir>/synth].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Dataset directory with manifest.json; every trial is processed.
    #[arg(long, conflicts_with_all = ["mocap", "radar"])]
    pub dataset: Option<PathBuf>,
    #[arg(long, requires = "radar")]
    pub mocap: Option<PathBuf>,
    #[arg(long, requires = "mocap")]
    pub radar: Option<PathBuf>,
    /// Sync pulse time on the MoCap clock (s).
    #[arg(long, default_value_t = 0.0)]
    pub sync_mocap: f64,
    /// Sync pulse time on the radar clock (s).
    #[arg(long, default_value_t = 0.0)]
    pub sync_radar: f64,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub hop: Option<usize>,
    /// Periodic Hann taper instead of rectangular.
    #[arg(long)]
    pub hann: bool,
    /// Output container [default: <data-dir>/pairs.bin].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    /// Held-out pairs evaluated every epoch.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Output directory [default: <data-dir>/run].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',', default_values_t = [0u64, 1, 2])]
    pub seeds: Vec<u64>,
    /// Comma-separated variants.
    #[arg(long, value_delimiter = ',', default_values_t = ["s".to_string(), "t".to_string(), "st".to_string()])]
    pub variants: Vec<String>,
    /// Output directory [default: <data-dir>/ablation].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["mocap", "pairs"])))]
pub struct InferArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// MoCap recording; resampled and windowed like the training data.
    #[arg(long)]
    pub mocap: Option<PathBuf>,
    /// Pairs container; one prediction per stored window, aligned with its
    /// measured row.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Prediction CSV [default: <data-dir>/prediction.csv].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Spectrogram CSV, pairs container or run log.
    #[arg(long)]
    pub input: PathBuf,
    /// Predicted spectrogram CSV drawn below the measured one.
    #[arg(long)]
    pub predicted: Option<PathBuf>,
    /// Output PGM; a CSV with the same stem holds the plotted values.
    #[arg(long)]
    pub out: PathBuf,
}
