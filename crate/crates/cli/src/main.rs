//! `camchain`: homography motion chains, pseudo videos and CameraScore from
//! the command line.
//!
//! Exit codes: 0 success, 2 partial result (some pairs failed or were
//! substituted), 1 error.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use camchain_core::features::{DEFAULT_FAST_THRESHOLD, DEFAULT_MAX_KEYPOINTS, DEFAULT_RATIO};

#[derive(Debug, Parser)]
#[command(name = "camchain", version, about = "Camera motion chains and CameraScore")]
pub struct Cli {
    /// `key = value` file supplying defaults for the subcommand's flags
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the frame-to-frame homography chain of a video
    Extract {
        /// Frame directory, single image, or printf pattern such as `f_%04d.ppm`
        video: PathBuf,
        /// Output chain JSON
        out: PathBuf,
        #[command(flatten)]
        estimation: Estimation,
    },
    /// Warp a still image along a chain into a pseudo video
    Warp {
        image: PathBuf,
        chain: PathBuf,
        out_dir: PathBuf,
        /// Replace failed pairs with identity instead of refusing
        #[arg(long)]
        skip_gaps: bool,
    },
    /// Print the CameraScore between two videos or chains
    Score {
        /// Reference video or chain (`.json`)
        reference: PathBuf,
        /// Generated video or chain (`.json`)
        generated: PathBuf,
        /// Write the full JSON report here
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
        /// Report a score even when fewer than 80% of pairs were compared
        #[arg(long)]
        allow_low_coverage: bool,
        /// Compare chains of different length by nearest pair fraction
        #[arg(long)]
        resample: bool,
        #[command(flatten)]
        estimation: Estimation,
    },
    /// Label each pair of a chain as translation, zoom, rotation, mixed or none
    Classify {
        chain: PathBuf,
        /// Center displacement (width units) below which translation is ignored
        #[arg(long, default_value_t = 0.005)]
        min_translation: f64,
        /// |scale - 1| below which zoom is ignored
        #[arg(long, default_value_t = 0.01)]
        min_scale: f64,
        /// Rotation (degrees) below which rotation is ignored
        #[arg(long, default_value_t = 0.5)]
        min_rotation: f64,
        /// Ratio by which the winning component must exceed the others
        #[arg(long, default_value_t = 2.0)]
        dominance: f64,
    },
    /// Write a synthetic textured sequence and its ground-truth chain
    Oracle {
        out_dir: PathBuf,
        #[arg(long, value_enum, default_value_t = MotionArg::Pan)]
        motion: MotionArg,
        /// Per-step pan, normalized units
        #[arg(long, default_value_t = 0.02, allow_hyphen_values = true)]
        dx: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        dy: f64,
        /// Per-step zoom factor about the center
        #[arg(long, default_value_t = 1.02)]
        scale: f64,
        /// Per-step rotation about the center, radians
        #[arg(long, default_value_t = 0.02, allow_hyphen_values = true)]
        theta: f64,
        /// JSON array of row-major 3x3 step matrices (for `--motion script`)
        #[arg(long, value_name = "FILE")]
        script: Option<PathBuf>,
        #[arg(long, default_value_t = 256)]
        width: usize,
        #[arg(long, default_value_t = 256)]
        height: usize,
        #[arg(long, default_value_t = 16)]
        frames: usize,
        /// Texture seed
        #[arg(long, env = "CAMCHAIN_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Low-rank adapter numerics
    Adapters {
        #[command(subcommand)]
        action: AdapterCommand,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MotionArg {
    Pan,
    Zoom,
    Rotate,
    Script,
}

#[derive(Debug, Args)]
pub struct Estimation {
    /// RANSAC seed
    #[arg(long, env = "CAMCHAIN_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Symmetric transfer error threshold, pixels
    #[arg(long, default_value_t = 3.0)]
    pub inlier_threshold: f64,
    #[arg(long, default_value_t = 0.995)]
    pub confidence: f64,
    #[arg(long, default_value_t = 2000)]
    pub max_iterations: usize,
    /// FAST contrast threshold on luma in [0, 1]
    #[arg(long, default_value_t = DEFAULT_FAST_THRESHOLD)]
    pub fast_threshold: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_KEYPOINTS)]
    pub max_keypoints: usize,
    /// Descriptor ratio test
    #[arg(long, default_value_t = DEFAULT_RATIO)]
    pub ratio: f64,
}

#[derive(Debug, Args)]
pub struct AdapterShape {
    /// Output dimension d
    #[arg(long, default_value_t = 4)]
    pub rows: usize,
    /// Input dimension k
    #[arg(long, default_value_t = 4)]
    pub cols: usize,
    #[arg(long, default_value_t = 2)]
    pub rank: usize,
}

#[derive(Debug, Subcommand)]
pub enum AdapterCommand {
    /// Compare orthogonality-loss gradients with central differences
    Gradcheck {
        /// Number of consecutive seeds to check
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        /// First seed
        #[arg(long, env = "CAMCHAIN_SEED", default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        shape: AdapterShape,
    },
    /// Walk through composition, losses and guidance on random adapters
    Demo {
        #[arg(long, env = "CAMCHAIN_SEED", default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        shape: AdapterShape,
        /// First-stage spatial weight, in (0, 1)
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
        /// Second-stage orthogonality weight
        #[arg(long, default_value_t = 0.1)]
        lambda: f64,
        /// Singular values kept per update; defaults to the rank
        #[arg(long)]
        k_sig: Option<usize>,
        /// Temporal noise-prediction loss fed to the combinators
        #[arg(long, default_value_t = 1.0)]
        l_temporal: f64,
        /// Spatial noise-prediction loss fed to the combinators
        #[arg(long, default_value_t = 1.0)]
        l_spatial: f64,
        /// Guidance strength
        #[arg(long, default_value_t = 0.25)]
        lambda_g: f64,
        /// Guidance iterations to print
        #[arg(long, default_value_t = 5)]
        steps: usize,
    },
    /// Orthogonality loss between two adapters stored as JSON
    Ortho {
        #[arg(long)]
        spatial: PathBuf,
        #[arg(long)]
        temporal: PathBuf,
        /// Singular values kept per update; defaults to the larger rank
        #[arg(long)]
        k_sig: Option<usize>,
        /// Write gradients with respect to the spatial factors here
        #[arg(long, value_name = "FILE")]
        grad: Option<PathBuf>,
    },
}

impl Command {
    fn path(&self) -> Vec<String> {
        let name = match self {
            Command::Extract { .. } => "extract",
            Command::Warp { .. } => "warp",
            Command::Score { .. } => "score",
            Command::Classify { .. } => "classify",
            Command::Oracle { .. } => "oracle",
            Command::Adapters { action } => {
                let sub = match action {
                    AdapterCommand::Gradcheck { .. } => "gradcheck",
                    AdapterCommand::Demo { .. } => "demo",
                    AdapterCommand::Ortho { .. } => "ortho",
                };
                return vec!["adapters".into(), sub.into()];
            }
        };
        vec![name.into()]
    }
}

/// Result of a subcommand that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Complete,
    Partial,
}

fn parse_args(args: Vec<OsString>) -> Result<Cli, clap::Error> {
    Cli::try_parse_from(args)
}

fn run(args: Vec<OsString>) -> anyhow::Result<Outcome> {
    let cli = match parse_args(args.clone()) {
        Ok(cli) => cli,
        Err(e) => return Err(ClapExit(e).into()),
    };
    let cli = match &cli.config {
        Some(file) => {
            let merged = config::merge(&args, &Cli::command(), &cli.command.path(), file)?;
            parse_args(merged).map_err(ClapExit)?
        }
        None => cli,
    };
    commands::dispatch(cli.command)
}

/// Carries clap's own help/usage output through the error path.
#[derive(Debug)]
struct ClapExit(clap::Error);

impl std::fmt::Display for ClapExit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ClapExit {}

fn main() -> ExitCode {
    match run(std::env::args_os().collect()) {
        Ok(Outcome::Complete) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(2),
        Err(e) => match e.downcast_ref::<ClapExit>() {
            Some(ClapExit(c)) => {
                let _ = c.print();
                if c.use_stderr() {
                    ExitCode::FAILURE
                } else {
                    ExitCode::SUCCESS
                }
            }
            None => {
                eprintln!("error: {e:#}");
                ExitCode::FAILURE
            }
        },
    }
}
