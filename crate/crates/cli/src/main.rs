//! `eyecontact` command-line tool.
//!
//! Exit status: 0 on success, 1 when a stage fails on valid input (for
//! example no device cluster or single-class labels), 2 for unreadable or
//! invalid input and usage errors, 3 when the run finished but some frames
//! could not be processed.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_PARTIAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "eyecontact", version, about = "Unsupervised eye-contact detection pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every command.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON configuration file (pipeline config; synth config for `synth`).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Random seed; only `synth` draws random numbers.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

/// Labeling overrides for commands that train.
#[derive(Debug, Clone, Args)]
pub struct LabelingFlags {
    /// OPTICS minimum neighbourhood size.
    #[arg(long)]
    pub min_pts: Option<usize>,

    /// OPTICS ξ steepness.
    #[arg(long)]
    pub xi: Option<f64>,

    /// Face-detector confidence threshold for training frames.
    #[arg(long)]
    pub confidence: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LabelsArg {
    Cluster,
    GroundTruth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Protocol {
    Holdout,
    Loocv,
    CrossDataset,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset with ground truth.
    Synth {
        /// Also write the hidden per-frame truth table (JSONL).
        #[arg(long)]
        truth: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Annotate face frames with head pose and normalization.
    Pose {
        /// Frame records (JSONL).
        input: PathBuf,
        /// 68-point face model file (default: bundled model).
        #[arg(long)]
        face_model: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Train PCA + SVM on pose-annotated frames.
    Train {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "cluster")]
        labels: LabelsArg,
        #[command(flatten)]
        labeling: LabelingFlags,
        #[command(flatten)]
        common: Common,
    },
    /// Predict eye contact per frame with a trained model.
    Predict {
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate predictions or run a cross-validation protocol.
    Eval {
        #[arg(long, value_enum)]
        protocol: Protocol,
        /// holdout: predictions (JSONL); loocv: pose-annotated frames.
        #[arg(long)]
        input: Option<PathBuf>,
        /// cross-dataset: training frames.
        #[arg(long)]
        train: Option<PathBuf>,
        /// cross-dataset: test frames.
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "cluster")]
        labels: LabelsArg,
        #[command(flatten)]
        labeling: LabelingFlags,
        #[command(flatten)]
        common: Common,
    },
    /// Attention metrics (glances, shifts, spans, primary focus) from predictions.
    Metrics {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Warp a frame image into the normalized camera.
    Warp {
        /// Pose-annotated frame records.
        input: PathBuf,
        /// Zero-based line of the frame in `input`.
        #[arg(long)]
        index: usize,
        /// Source image (PNG).
        #[arg(long)]
        image: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth { truth, common } => commands::synth(&common, truth.as_deref()),
        Command::Pose {
            input,
            face_model,
            common,
        } => commands::pose(&common, &input, face_model.as_deref()),
        Command::Train {
            input,
            labels,
            labeling,
            common,
        } => commands::train(&common, &labeling, &input, labels),
        Command::Predict { input, model, common } => commands::predict(&common, &input, &model),
        Command::Eval {
            protocol,
            input,
            train,
            test,
            labels,
            labeling,
            common,
        } => commands::eval(&common, &labeling, protocol, input.as_deref(), train.as_deref(), test.as_deref(), labels),
        Command::Metrics { input, common } => commands::metrics(&common, &input),
        Command::Warp {
            input,
            index,
            image,
            common,
        } => commands::warp(&common, &input, index, &image),
    };
    match result {
        Ok(commands::Outcome::Complete) => ExitCode::SUCCESS,
        Ok(commands::Outcome::Partial(n)) => {
            eprintln!("warning: {n} frame(s) could not be processed");
            ExitCode::from(EXIT_PARTIAL)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
