mod commands;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "paveval",
    version,
    about = "Pavement distress detection dataset and evaluation toolkit"
)]
pub struct Cli {
    /// Emit machine-readable JSON on stdout instead of tables.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Convert annotations between VOC directories, DarkNet directories and JSON.
    Convert {
        #[arg(long, value_enum)]
        from: Format,
        #[arg(long, value_enum)]
        to: Format,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
    },
    /// Split a dataset directory into train1/train2/test subdirectories.
    Split {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
        /// Three comma-separated fractions summing to 1.
        #[arg(long, default_value = "0.4,0.3,0.3")]
        fractions: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Score predictions against ground truth.
    Evaluate {
        /// Ground-truth JSON file or annotation directory.
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
    },
    /// Per-class F1 of several prediction files side by side.
    Compare {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, required = true)]
        pred: Vec<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
    },
    /// Run an augmentation pipeline over a dataset directory.
    Augment {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        multiplier: usize,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
    },
    /// Test-time augmentation.
    Tta {
        #[command(subcommand)]
        command: TtaCommand,
    },
    /// Draft labels from predictions and measure corrections.
    Autolabel {
        #[command(subcommand)]
        command: AutolabelCommand,
    },
    /// Annotation quality checks.
    Qa {
        #[command(subcommand)]
        command: QaCommand,
    },
    /// Run the submission server.
    Serve(ServeArgs),
}

#[derive(Subcommand, Debug)]
pub enum TtaCommand {
    /// Write the ten augmented copies of every image plus a sidecar of transforms.
    Emit {
        /// Image directory, optionally with VOC or DarkNet labels.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fuse detections made on emitted copies back onto the source images.
    Fuse {
        /// Directory written by `tta emit`.
        #[arg(long)]
        bundle: PathBuf,
        /// Predictions on the copies (defaults to predictions.json in the bundle).
        #[arg(long)]
        pred: Option<PathBuf>,
        #[arg(long, default_value_t = paveval_core::postprocess::DEFAULT_CONF_THRESHOLD)]
        conf: f64,
        #[arg(long, default_value_t = paveval_core::postprocess::DEFAULT_NMS_IOU)]
        nms_iou: f64,
        /// Write the fused submission here instead of stdout.
        #[arg(long = "out")]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
pub enum AutolabelCommand {
    /// Turn predictions into draft annotations.
    Draft {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, default_value_t = paveval_core::postprocess::DEFAULT_CONF_THRESHOLD)]
        conf: f64,
        /// Directory of images giving each image's size.
        #[arg(long)]
        images: Option<PathBuf>,
        #[arg(long = "out")]
        output: PathBuf,
        #[arg(long, value_enum, default_value = "submission")]
        format: Format,
    },
    /// Count kept, relabeled, resized, added and deleted boxes.
    Diff {
        #[arg(long)]
        draft: PathBuf,
        #[arg(long)]
        corrected: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        match_iou: f64,
        #[arg(long, default_value_t = 0.9)]
        keep_iou: f64,
    },
}

#[derive(Subcommand, Debug)]
pub enum QaCommand {
    /// Label confusion matrix between two annotations of the same images.
    Confusion {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long = "cand")]
        candidate: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
    },
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    /// Ground-truth JSON file or annotation directory.
    #[arg(long, env = "PAVEVAL_GT")]
    pub gt: Option<PathBuf>,
    /// JSON array of {team_id, display_name, token}.
    #[arg(long, env = "PAVEVAL_TEAMS")]
    pub teams: PathBuf,
    #[arg(long, env = "PAVEVAL_ADDR", default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Directory for the submission log and stored bodies.
    #[arg(long, env = "PAVEVAL_DATA", default_value = "paveval-data")]
    pub data: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Voc,
    Darknet,
    /// JSON array of {image_id, category_id, bbox[, score]}.
    Submission,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let default_level = if matches!(cli.command, Command::Serve(_)) {
        "info"
    } else {
        "warn"
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default_level)),
        )
        .init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
