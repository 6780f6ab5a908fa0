//! Command-line surface. Defaults come from [`PipelineConfig::default`].

use std::path::PathBuf;
use std::sync::LazyLock;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use ssmlab::PipelineConfig;

pub static DEFAULTS: LazyLock<PipelineConfig> = LazyLock::new(PipelineConfig::default);

#[derive(Debug, Parser)]
#[command(name = "ssmlab", version, about = "Shape models, synthetic labeled datasets and landmark segmentation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic corresponded cohort with ground-truth labels
    Fixture(FixtureArgs),
    /// Align a cohort and build a shape model
    BuildSsm(BuildSsmArgs),
    /// Copy mean-shape labels onto a corresponded shape
    TransferLabels(TransferArgs),
    /// Generate a labeled point-cloud dataset from a shape model
    Generate(GenerateArgs),
    /// Train the point segmenter on a generated dataset
    Train(TrainArgs),
    /// Label point clouds with a trained segmenter
    Predict(PredictArgs),
    /// Score predictions against a dataset split
    Evaluate(EvaluateArgs),
    /// Aggregate annotator label maps and score them against the truth
    Study(StudyArgs),
    /// Serve the mean shape and its labels to the annotation UI
    AnnotateServe(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MeshFormatArg {
    Obj,
    Ply,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DownsampleArg {
    Fps,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Union,
    Majority,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    /// Number of shapes
    #[arg(long, default_value_t = 10)]
    pub shapes: usize,
    /// Minimum vertices per shape
    #[arg(long, default_value_t = 2000)]
    pub vertices: usize,
    /// Seed for the random deformations and poses
    #[arg(long, default_value_t = DEFAULTS.seed)]
    pub seed: u64,
    /// Mesh file format
    #[arg(long, value_enum, default_value_t = MeshFormatArg::Obj)]
    pub format: MeshFormatArg,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BuildSsmArgs {
    /// Mesh files (.obj/.ply) or directories containing them
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Model file to write
    #[arg(long)]
    pub out: PathBuf,
    /// Normalize every shape to unit centroid size
    #[arg(long, action = ArgAction::Set, default_value_t = DEFAULTS.model.scaling)]
    pub scaling: bool,
    /// Keep the fewest modes explaining this share of variance (all modes if unset)
    #[arg(long)]
    pub variance_fraction: Option<f64>,
    /// Also write the mean mesh here
    #[arg(long)]
    pub mean_mesh: Option<PathBuf>,
    /// Pipeline config file; flags given explicitly take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    /// Label CSV of the mean shape
    #[arg(long)]
    pub labels: PathBuf,
    /// Class table JSON (built-in landmark table if unset)
    #[arg(long)]
    pub classes: Option<PathBuf>,
    /// Target mesh sharing the model's vertex indexing
    #[arg(long, required_unless_present = "model", conflicts_with = "model")]
    pub mesh: Option<PathBuf>,
    /// Shape model whose vertex count the labels must match
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Label CSV to write
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Shape model file
    #[arg(long)]
    pub model: PathBuf,
    /// Label CSV of the mean shape
    #[arg(long)]
    pub labels: PathBuf,
    /// Class table JSON (built-in landmark table if unset)
    #[arg(long)]
    pub classes: Option<PathBuf>,
    /// Dataset directory
    #[arg(long)]
    pub out: PathBuf,
    /// Master seed
    #[arg(long, default_value_t = DEFAULTS.seed)]
    pub seed: u64,
    /// Training shapes
    #[arg(long, default_value_t = DEFAULTS.dataset.n_train)]
    pub train: usize,
    /// Validation shapes
    #[arg(long, default_value_t = DEFAULTS.dataset.n_val)]
    pub val: usize,
    /// Test shapes
    #[arg(long, default_value_t = DEFAULTS.dataset.n_test)]
    pub test: usize,
    /// Points per cloud
    #[arg(long, default_value_t = DEFAULTS.dataset.n_points)]
    pub points: usize,
    /// Lower end of the coefficient range, in standard deviations
    #[arg(long, allow_negative_numbers = true, default_value_t = DEFAULTS.dataset.sigma_lo)]
    pub sigma_lo: f64,
    /// Upper end of the coefficient range, in standard deviations
    #[arg(long, allow_negative_numbers = true, default_value_t = DEFAULTS.dataset.sigma_hi)]
    pub sigma_hi: f64,
    /// Randomly rotate training clouds
    #[arg(long, action = ArgAction::Set, default_value_t = DEFAULTS.dataset.rotate.train)]
    pub rotate_train: bool,
    /// Randomly rotate validation clouds
    #[arg(long, action = ArgAction::Set, default_value_t = DEFAULTS.dataset.rotate.val)]
    pub rotate_val: bool,
    /// Randomly rotate test clouds
    #[arg(long, action = ArgAction::Set, default_value_t = DEFAULTS.dataset.rotate.test)]
    pub rotate_test: bool,
    /// How points are picked from the model vertices
    #[arg(long, value_enum, default_value_t = DownsampleArg::Fps)]
    pub downsample: DownsampleArg,
    /// First vertex picked by farthest-point sampling
    #[arg(long, default_value_t = DEFAULTS.dataset.fps_start)]
    pub fps_start: usize,
    /// Threads (0 = all cores, 1 = sequential); never changes the output
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Pipeline config file; flags given explicitly take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory
    #[arg(long)]
    pub data: PathBuf,
    /// Model file to write
    #[arg(long)]
    pub out: PathBuf,
    /// Passes over the training split
    #[arg(long, default_value_t = DEFAULTS.training.epochs)]
    pub epochs: usize,
    /// Adam learning rate
    #[arg(long, default_value_t = DEFAULTS.training.lr)]
    pub lr: f64,
    /// Shapes per optimizer step
    #[arg(long, default_value_t = DEFAULTS.training.batch_size)]
    pub batch_size: usize,
    /// Seed for initialization and batch order
    #[arg(long, default_value_t = DEFAULTS.training.seed)]
    pub seed: u64,
    /// Hidden layer widths
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULTS.training.hidden.clone())]
    pub hidden: Vec<usize>,
    /// Neighbourhood sizes for the point features
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULTS.training.scales.clone())]
    pub scales: Vec<usize>,
    /// Upper bound on class weights
    #[arg(long, default_value_t = DEFAULTS.training.weight_cap)]
    pub weight_cap: f64,
    /// Threads for feature extraction (0 = all cores)
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Pipeline config file; flags given explicitly take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Segmenter model file
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset directory to predict one split of
    #[arg(long, required_unless_present = "input", conflicts_with = "input")]
    pub data: Option<PathBuf>,
    /// Dataset split to label
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
    /// Output directory for dataset predictions
    #[arg(long, requires = "data")]
    pub out: Option<PathBuf>,
    /// Single .xyzl cloud to predict (its labels are ignored)
    #[arg(long, requires = "output")]
    pub input: Option<PathBuf>,
    /// Output file for --input
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Threads (0 = all cores)
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Dataset directory
    #[arg(long)]
    pub data: PathBuf,
    /// Directory of predicted .xyzl files
    #[arg(long)]
    pub predictions: PathBuf,
    /// Dataset split to score
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
    /// Count background as a class in mIoU
    #[arg(long, action = ArgAction::Set, default_value_t = DEFAULTS.eval.include_background)]
    pub include_background: bool,
    /// JSON report file
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-shape CSV file
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Threads (0 = all cores)
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Pipeline config file; flags given explicitly take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    /// One subdirectory per shape, holding one label CSV per annotator
    #[arg(long)]
    pub annotations: PathBuf,
    /// Transferred ground-truth label CSV shared by all shapes
    #[arg(long)]
    pub truth: PathBuf,
    /// Class table JSON (built-in landmark table if unset)
    #[arg(long)]
    pub classes: Option<PathBuf>,
    /// How annotators are combined per vertex
    #[arg(long, value_enum, default_value_t = PolicyArg::Union)]
    pub policy: PolicyArg,
    /// CSV report file
    #[arg(long)]
    pub out: PathBuf,
    /// Optional JSON report file
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Mean mesh to annotate
    #[arg(long, required_unless_present = "model", conflicts_with = "model")]
    pub mesh: Option<PathBuf>,
    /// Shape model whose mean shape is annotated
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Class table JSON (built-in landmark table if unset)
    #[arg(long)]
    pub classes: Option<PathBuf>,
    /// Initial label CSV (all background if unset)
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Where accepted labels are written (defaults to --labels)
    #[arg(long)]
    pub save: Option<PathBuf>,
    /// Directory with the UI bundle, served at /
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    /// Address to listen on
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Port to listen on (0 picks a free one)
    #[arg(long, default_value_t = 8750)]
    pub port: u16,
}
