//! `tabe`: amodal video segmentation toolkit.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] tabe_core::Error),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("output error: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Core(tabe_core::Error::Config(_)) => 2,
            CliError::Core(tabe_core::Error::Backend { .. }) => 3,
            _ => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "tabe", version, about = "Zero-shot amodal video segmentation toolkit")]
pub struct Cli {
    /// Seed for every random choice (mask generation, synthetic scenes, noisy mocks)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON file with module configs; flags override it
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the JSON result here instead of stdout
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Label each frame unoccluded / occluded / out of frame
    Occlusion(OcclusionArgs),
    /// Estimate amodal bounding boxes
    Bbox(BboxArgs),
    /// Build per-frame outpainting target regions
    TargetRegion(TargetRegionArgs),
    /// Composite an occluder clip over an object clip
    Composite(CompositeArgs),
    /// Write fine-tuning samples and their manifest
    Trainprep(TrainprepArgs),
    /// Score predicted amodal masks against ground truth
    Eval(EvalArgs),
    /// Count occlusion categories in ground-truth sequences
    Stats(StatsArgs),
    /// Run or inspect the end-to-end pipeline
    #[command(subcommand)]
    Pipeline(PipelineCommand),
    /// Draw mask overlays on frames
    Render(RenderArgs),
    /// Generate a synthetic occlusion scene with ground truth
    Synth(SynthArgs),
    /// Answer wire-protocol requests on stdin from a synthetic scene
    MockServe(MockServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum PipelineCommand {
    /// Segment, analyse, outpaint and re-segment a sequence
    Run(PipelineRunArgs),
    /// Print the wire-protocol JSON schema
    Schema,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConnectivityArg {
    #[value(name = "4")]
    Four,
    #[value(name = "8")]
    Eight,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticArg {
    Mean,
    Median,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PredField {
    Amodal,
    Visible,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MockModeArg {
    Oracle,
    Echo,
    Noisy,
}

#[derive(Debug, Args, Serialize)]
pub struct OcclusionArgs {
    /// Sequence manifest with visible masks and nearness maps
    #[arg(long)]
    pub manifest: PathBuf,
    /// Nearness-derivative threshold t
    #[arg(long)]
    pub t: Option<f64>,
    /// Occlusion-fraction threshold tau
    #[arg(long)]
    pub tau: Option<f64>,
    /// Boundary connectivity
    #[arg(long, value_enum)]
    pub connectivity: Option<ConnectivityArg>,
    /// Probe distance along the normal, in pixels
    #[arg(long)]
    pub probe_distance: Option<f64>,
    /// Use raw nearness values instead of per-frame min-max normalization
    #[arg(long)]
    pub no_normalize: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct BboxArgs {
    /// Sequence manifest with visible masks and nearness maps
    #[arg(long)]
    pub manifest: PathBuf,
    /// Occlusion verdicts; computed when omitted
    #[arg(long)]
    pub verdicts: Option<PathBuf>,
    /// Uniform box expansion (+) or contraction (-) in percent
    #[arg(long, allow_negative_numbers = true)]
    pub expand: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct TargetRegionArgs {
    /// Sequence manifest with visible masks and nearness maps
    #[arg(long)]
    pub manifest: PathBuf,
    /// Amodal boxes from `tabe bbox`
    #[arg(long)]
    pub boxes: PathBuf,
    /// Occlusion verdicts; computed when omitted
    #[arg(long)]
    pub verdicts: Option<PathBuf>,
    /// Directory for the region masks and index.json
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Reference nearness statistic over the visible mask
    #[arg(long, value_enum)]
    pub statistic: Option<StatisticArg>,
}

#[derive(Debug, Args, Serialize)]
pub struct CompositeArgs {
    /// Scene file listing the clips, alpha mattes, amodal masks and offsets
    #[arg(long)]
    pub scene: PathBuf,
    /// Directory for composited frames, masks and manifest.json
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Solve the foreground colour against the object frame instead of the clean plate
    #[arg(long)]
    pub verbatim_eq: bool,
    /// Alpha above which a pixel counts as hidden
    #[arg(long)]
    pub alpha_cut: Option<f64>,
    /// Alpha at or below which a pixel is fully transparent
    #[arg(long)]
    pub alpha_min: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainprepArgs {
    /// Sequence manifest with frames and visible masks
    #[arg(long)]
    pub manifest: PathBuf,
    /// Occlusion verdicts from `tabe occlusion`
    #[arg(long)]
    pub verdicts: PathBuf,
    /// Prompt token standing for the object
    #[arg(long)]
    pub token: Option<String>,
    /// Directory for the samples and finetune_manifest.json
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    /// Manifest with predicted masks; repeat once per sequence
    #[arg(long, required = true)]
    pub pred_manifest: Vec<PathBuf>,
    /// Ground-truth manifest; repeat in the same order
    #[arg(long, required = true)]
    pub gt_manifest: Vec<PathBuf>,
    /// Manifest field holding the prediction
    #[arg(long, value_enum, default_value = "amodal")]
    pub pred_field: PredField,
    /// Row label for the printed table
    #[arg(long, default_value = "tabe")]
    pub label: String,
}

#[derive(Debug, Args, Serialize)]
pub struct StatsArgs {
    /// Ground-truth manifest; repeat once per sequence
    #[arg(long, required = true)]
    pub gt_manifest: Vec<PathBuf>,
    /// Row label for the printed table
    #[arg(long, default_value = "dataset")]
    pub label: String,
}

#[derive(Debug, Args, Serialize)]
pub struct PipelineRunArgs {
    /// Sequence manifest listing the input frames
    #[arg(long)]
    pub manifest: PathBuf,
    /// Frame-0 query mask
    #[arg(long)]
    pub query: PathBuf,
    /// Backend descriptors for segmenter, depth estimator and outpainter
    #[arg(long)]
    pub backends: PathBuf,
    /// Work directory for every artifact
    #[arg(long)]
    pub workdir: PathBuf,
    /// Target chunk length
    #[arg(long)]
    pub chunk_len: Option<usize>,
    /// Hard cap on chunk length
    #[arg(long)]
    pub max_chunk_len: Option<usize>,
    /// Uniform box expansion (+) or contraction (-) in percent
    #[arg(long, allow_negative_numbers = true)]
    pub bbox_expand: Option<f64>,
    /// Dispatch outpainting chunks concurrently
    #[arg(long)]
    pub parallel_chunks: bool,
    /// Prompt token standing for the object
    #[arg(long)]
    pub token: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct RenderArgs {
    /// Manifest whose masks are drawn (gt_amodal green, gt_visible red, amodal_mask magenta)
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory for the rendered frames
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Layer opacity
    #[arg(long, default_value_t = 0.5)]
    pub opacity: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// Directory for the scene
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Frame width
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    /// Frame height
    #[arg(long, default_value_t = 48)]
    pub height: usize,
    /// Minimum frame count
    #[arg(long, default_value_t = 20)]
    pub min_frames: usize,
    /// Maximum frame count
    #[arg(long, default_value_t = 40)]
    pub max_frames: usize,
    /// Leave out the occluder
    #[arg(long)]
    pub no_occluder: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct MockServeArgs {
    /// scene.json written by `tabe synth`
    #[arg(long)]
    pub scene: PathBuf,
    /// Outpainter behaviour
    #[arg(long, value_enum, default_value = "oracle")]
    pub mode: MockModeArg,
    /// Segmentation bit-flip probability in noisy mode
    #[arg(long, default_value_t = 0.0)]
    pub noise_rate: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
