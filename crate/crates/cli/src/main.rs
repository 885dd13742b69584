//! `granulom`: texture classification pipeline over PNM images and CSV feature tables.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 I/O error.

mod commands;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use granulom_core::morphology::Family;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Io(m) => m,
        }
    }

    /// Prefixes the message, keeping the exit code.
    pub fn context(self, what: &str) -> Self {
        match self {
            CliError::Usage(m) => CliError::Usage(format!("{what}: {m}")),
            CliError::Data(m) => CliError::Data(format!("{what}: {m}")),
            CliError::Io(m) => CliError::Io(format!("{what}: {m}")),
        }
    }
}

impl From<granulom_core::Error> for CliError {
    fn from(e: granulom_core::Error) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "granulom", version, about = "Granulometric texture features, k-NN classification and GA feature selection")]
pub struct Cli {
    /// Seed for every random step (overrides seeds in spec and config files)
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads; never changes any output
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Only print warnings and errors
    #[arg(long, short, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic texture corpus (PPM images and manifest.csv)
    Synth(SynthArgs),
    /// Extract a feature dataset from images
    Extract(ExtractArgs),
    /// Split a dataset into training and test sets
    Split(SplitArgs),
    /// Classify a test set with the k-NN or template rule
    Knn(KnnArgs),
    /// Select features with the genetic algorithm
    Select(SelectArgs),
    /// Project a dataset on its first principal components
    Pca(PcaArgs),
    /// Scatter files for pairs of raw features
    Scatter(ScatterArgs),
    /// Size-intensity diagram of an image
    Si(SiArgs),
    /// Opening or closing granulometry curve of an image
    Granulo(GranuloArgs),
    /// Apply one morphological operator to an image
    Morph(MorphArgs),
    /// Run the whole workflow from a config file
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Corpus spec file (`key = value` sections); defaults to the built-in granite14
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Recipe name (lot117, rgb27) or a comma-separated extractor list
    #[arg(long, default_value = "lot117")]
    pub recipe: String,
    /// Image directory; uses its manifest.csv when present, otherwise labels come from `<label>-<n>` file names
    #[arg(long, conflicts_with = "manifest", required_unless_present = "manifest")]
    pub dir: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Fraction of samples held out for testing
    #[arg(long, default_value_t = 0.211, conflicts_with = "test_count")]
    pub test_fraction: f64,
    /// Exact number of test samples
    #[arg(long)]
    pub test_count: Option<usize>,
    #[arg(long)]
    pub train_out: PathBuf,
    #[arg(long)]
    pub test_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct KnnArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Feature mask as a 0/1 string or a file holding one
    #[arg(long)]
    pub mask: Option<String>,
    /// Minimum distance to class means instead of k-NN
    #[arg(long)]
    pub template: bool,
    /// Min-max scale features using the training set
    #[arg(long)]
    pub normalize: bool,
    /// Per-sample report CSV
    #[arg(long)]
    pub report: PathBuf,
    /// Plain-text table of errors and split votes
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Confusion counts CSV
    #[arg(long)]
    pub confusion: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub train: PathBuf,
    /// Set the fitness is measured on; using the final test set here leaks its labels into the selection
    #[arg(long)]
    pub eval: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub pop: usize,
    #[arg(long, default_value_t = 814)]
    pub gens: usize,
    #[arg(long, default_value_t = 1.0)]
    pub pc: f64,
    #[arg(long, default_value_t = 0.9)]
    pub pm: f64,
    #[arg(long, default_value_t = 0.6)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.4)]
    pub beta: f64,
    #[arg(long, default_value_t = 1)]
    pub elitism: usize,
    /// Stop after this many generations without improvement
    #[arg(long)]
    pub stagnation: Option<usize>,
    /// Allow alpha + beta != 1
    #[arg(long)]
    pub no_weight_check: bool,
    #[arg(long)]
    pub normalize: bool,
    /// Mask file (one line of 0/1)
    #[arg(long)]
    pub out: PathBuf,
    /// Per-generation CSV: gen,best,median,min,best_nf
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Key/value run summary
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PcaArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Use the correlation matrix (standardised features)
    #[arg(long)]
    pub correlation: bool,
    /// Optional mask restricting the features used
    #[arg(long)]
    pub mask: Option<String>,
    /// Write eigenvalues as `component,eigenvalue` rows
    #[arg(long)]
    pub eigenvalues: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScatterArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// 1-based feature numbers, e.g. 70,112
    #[arg(long, value_delimiter = ',', conflicts_with = "mask", required_unless_present = "mask")]
    pub features: Vec<usize>,
    /// Use the features enabled by a mask
    #[arg(long)]
    pub mask: Option<String>,
    /// Output CSV for two features; output directory for more
    #[arg(long)]
    pub out: PathBuf,
    /// Also write an SVG next to each CSV
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args)]
pub struct SiArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long, default_value = "hexagon")]
    pub family: Family,
    #[arg(long, default_value_t = 30)]
    pub r_max: usize,
    #[arg(long, default_value_t = 255)]
    pub k_max: u8,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GranuloArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long, default_value = "hexagon")]
    pub family: Family,
    #[arg(long, default_value_t = 30)]
    pub r_max: usize,
    /// Closing granulometry instead of openings
    #[arg(long)]
    pub closing: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum MorphOp {
    Erode,
    Dilate,
    Open,
    Close,
}

#[derive(Debug, Args)]
pub struct MorphArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long, value_enum)]
    pub op: MorphOp,
    #[arg(long, default_value = "hexagon")]
    pub family: Family,
    #[arg(long)]
    pub size: usize,
    /// Output PGM
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Run directory
    #[arg(long)]
    pub out: PathBuf,
}

fn run(cli: Cli) -> CliResult {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let seed = cli.seed;
    match cli.command {
        Command::Synth(a) => commands::synth(a, seed),
        Command::Extract(a) => commands::extract(a),
        Command::Split(a) => commands::split(a, seed),
        Command::Knn(a) => commands::knn(a),
        Command::Select(a) => commands::select(a, seed),
        Command::Pca(a) => commands::pca(a),
        Command::Scatter(a) => commands::scatter(a),
        Command::Si(a) => commands::si(a),
        Command::Granulo(a) => commands::granulo(a),
        Command::Morph(a) => commands::morph(a),
        Command::Pipeline(a) => pipeline::run(a, seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.quiet { log::LevelFilter::Warn } else { log::LevelFilter::Info })
        .format_timestamp(None)
        .format_target(false)
        .parse_env("GRANULOM_LOG")
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{}", e.message());
            ExitCode::from(e.code())
        }
    }
}
