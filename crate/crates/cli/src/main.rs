mod commands;
mod config;
mod dataset;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use flakelab::mixture::ModelKind;

#[derive(Debug, Parser)]
#[command(name = "flakelab", version, about = "Synthetic flake images, contrast classifiers and AP50 evaluation")]
pub struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for per-image parallel work.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output file or directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract flake silhouettes from microscope images into a shape library.
    MineShapes {
        /// Image files or directories.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Render a synthetic dataset (images plus annotations.json).
    Generate {
        #[arg(long)]
        count: usize,
        /// Shape library directory.
        #[arg(long)]
        shapes: Option<PathBuf>,
    },
    /// Fit a contrast classifier on an annotated dataset.
    Train {
        /// Annotation file.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_parser = parse_kind)]
        classifier: Option<ModelKind>,
        /// Use only the first N images.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Segment flakes in images with a trained classifier.
    Detect {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Annotation file whose images to process, keeping their ids.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Skip the first N images of --data.
        #[arg(long, default_value_t = 0)]
        skip: usize,
        /// Image files or directories.
        inputs: Vec<PathBuf>,
    },
    /// Score detections against ground truth with AP at an IoU threshold.
    Evaluate {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
    },
    /// Print the rendered color of a flake stack on the substrate.
    RenderColor {
        #[arg(long, default_value_t = 1)]
        layers: i64,
        #[arg(long, default_value_t = 90.0)]
        substrate_nm: f64,
    },
    /// Validate a directory of images and annotations into a manifest.
    Import {
        dir: PathBuf,
        /// Annotation file; found in the directory when omitted.
        #[arg(long)]
        annotations: Option<PathBuf>,
        #[arg(long, default_value = "train")]
        split: String,
    },
}

fn parse_kind(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: flakelab::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace(['\n', '\r'], " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
