use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use intake_core::detector::{
    DEFAULT_GRID_HI, DEFAULT_GRID_LO, DEFAULT_GRID_STEP, DEFAULT_MIN_DISTANCE_S,
};
use intake_core::synth::SessionConfig;

mod commands;
mod output;
mod svg;

use commands::CliError;

const DEFAULT_FPS: f64 = 8.0;

/// Intake gesture detection from frame-level probabilities.
///
/// Exit codes: 0 success, 2 invalid input, 1 internal error.
/// Set RUST_LOG (e.g. RUST_LOG=debug) for log output.
#[derive(Debug, Parser)]
#[command(name = "intake", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-frame labels from an annotation CSV.
    Label(LabelArgs),
    /// Threshold and peak-pick a probability CSV into detections.
    Detect(DetectArgs),
    /// Grid-search the threshold maximizing F1 over matched session files.
    Tune(TuneArgs),
    /// Score detections against annotations.
    Eval(EvalArgs),
    /// Layer table and parameter count of a built-in architecture.
    Params(ParamsArgs),
    /// Generate synthetic sessions.
    Simulate(SimulateArgs),
    /// Render probabilities, detections and annotations as an SVG timeline.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    pub annotations: PathBuf,
    /// Frame rate of the labeled video.
    #[arg(long, default_value_t = DEFAULT_FPS)]
    pub fps: f64,
    /// Number of frames to label.
    #[arg(long, conflicts_with = "duration", required_unless_present = "duration")]
    pub n_frames: Option<u64>,
    /// Video length in seconds; labels `floor(duration * fps)` frames.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Keep every k-th frame so the output runs at this rate (must divide --fps).
    #[arg(long)]
    pub downsample_to: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    pub probs: PathBuf,
    #[arg(long)]
    pub threshold: f64,
    /// Minimum distance between detections, in seconds.
    #[arg(long, default_value_t = DEFAULT_MIN_DISTANCE_S)]
    pub min_dist: f64,
    #[arg(long, default_value_t = DEFAULT_FPS)]
    pub fps: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, Args, serde::Serialize)]
pub struct GridArgs {
    #[arg(long, default_value_t = DEFAULT_GRID_LO)]
    pub grid_lo: f64,
    #[arg(long, default_value_t = DEFAULT_GRID_HI)]
    pub grid_hi: f64,
    #[arg(long, default_value_t = DEFAULT_GRID_STEP)]
    pub grid_step: f64,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    /// Directory of `<stem>.csv` probability files.
    pub probs_dir: PathBuf,
    /// Directory of `<stem>.csv` annotation files.
    pub annotations_dir: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = DEFAULT_MIN_DISTANCE_S)]
    pub min_dist: f64,
    #[arg(long, default_value_t = DEFAULT_FPS)]
    pub fps: f64,
    /// Report JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub detections: PathBuf,
    pub annotations: PathBuf,
    #[arg(long, default_value_t = DEFAULT_FPS)]
    pub fps: f64,
    /// Report JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ParamsArgs {
    pub arch: String,
    /// Also write the layer table as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = SessionConfig::default().duration_s)]
    pub duration: f64,
    #[arg(long, default_value_t = SessionConfig::default().gesture_mean_s)]
    pub gesture_mean: f64,
    #[arg(long, default_value_t = SessionConfig::default().gesture_std_s)]
    pub gesture_std: f64,
    #[arg(long, default_value_t = SessionConfig::default().mean_gap_s)]
    pub mean_gap: f64,
    #[arg(long, default_value_t = SessionConfig::default().min_gap_s)]
    pub min_gap: f64,
    #[arg(long, default_value_t = SessionConfig::default().noise_std)]
    pub noise_std: f64,
    #[arg(long, default_value_t = DEFAULT_FPS)]
    pub fps: f64,
    /// Output directory; receives probs/, annotations/ and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub probs: PathBuf,
    pub detections: PathBuf,
    pub annotations: PathBuf,
    /// Threshold drawn on the plot.
    #[arg(long)]
    pub threshold: f64,
    #[arg(long, default_value_t = DEFAULT_FPS)]
    pub fps: f64,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Label(a) => commands::label(a),
        Command::Detect(a) => commands::detect(a),
        Command::Tune(a) => commands::tune(a),
        Command::Eval(a) => commands::eval(a),
        Command::Params(a) => commands::params(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(CliError::Internal(e)) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(1)
        }
    }
}
