mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::Settings;

#[derive(Debug, Parser)]
#[command(name = "camprior", version, about = "Camera priors, splat rendering and rig augmentation")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// key = value config file; flags take precedence
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads, 0 = one per core
    #[arg(long, global = true, env = "CAMPRIOR_THREADS")]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Ground depth clamp in metres
    #[arg(long, global = true)]
    pub max_depth: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub focal_channel_mode: Option<FocalMode>,
    #[arg(long, global = true, value_enum)]
    pub log_level: Option<LogLevel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FocalMode {
    Eq2,
    Normalized500,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogLevel {
    Off,
    Error,
    Warn,
    Info,
    Debug,
    Trace,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Inspect and export camera rigs
    #[command(subcommand)]
    Rig(RigCommand),
    /// Ground depth, ground gradient and full prior stacks
    #[command(subcommand)]
    Priors(PriorsCommand),
    /// Spatial-aware feature modulation
    #[command(subcommand)]
    Sfm(SfmCommand),
    /// Build Gaussian scenes from RGB-D frames and point clouds
    #[command(subcommand)]
    Scene(SceneCommand),
    /// Render a scene into every (or one) rig camera
    Render(RenderArgs),
    /// Sample perturbed rigs and focal-resize images
    #[command(subcommand)]
    Augment(AugmentCommand),
    /// Detection scores
    #[command(subcommand)]
    Metrics(MetricsCommand),
}

#[derive(Debug, Subcommand)]
pub enum RigCommand {
    /// Print intrinsics, FoVs and poses
    Show {
        /// Preset name or rig JSON file
        rig: String,
    },
    /// Write a rig as JSON
    Export {
        rig: String,
        #[arg(short, long)]
        output: PathBuf,
        /// Rescale every camera's image size and intrinsics
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
    },
}

#[derive(Debug, Args)]
pub struct CameraSelect {
    /// Preset name or rig JSON file
    #[arg(long)]
    pub rig: String,
    #[arg(long)]
    pub camera: String,
}

#[derive(Debug, Subcommand)]
pub enum PriorsCommand {
    /// Ground depth and gradient maps with their validity mask
    Ground {
        #[command(flatten)]
        select: CameraSelect,
        /// Output size relative to the camera image
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// The nine-channel prior stack at a feature resolution
    Build {
        #[command(flatten)]
        select: CameraSelect,
        #[arg(long)]
        out_w: usize,
        #[arg(long)]
        out_h: usize,
        /// Unit-length Plücker directions
        #[arg(long)]
        unit_directions: bool,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum SfmCommand {
    /// Compute F1, F2 and F3 for a feature stack
    Run {
        #[command(flatten)]
        select: CameraSelect,
        /// Channel-stack directory (manifest.json + PFMs)
        #[arg(long)]
        feature: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Write projector weights (Xavier-uniform from --seed, or zeros)
    InitWeights {
        /// Projector output channels; must match the feature stack
        #[arg(long)]
        c_out: usize,
        #[arg(long)]
        zeros: bool,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum SceneCommand {
    /// One background Gaussian per valid depth pixel
    Build {
        #[arg(long)]
        rig: String,
        /// Directory with <camera>/rgb.png and <camera>/depth.pfm
        #[arg(long)]
        frames: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Add points from a PLY file to a scene
    Append {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long)]
        points: PathBuf,
        /// Use the fixed foreground radius
        #[arg(long)]
        foreground: bool,
        /// Defaults to overwriting the input
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub rig: String,
    #[arg(long)]
    pub camera: Option<String>,
    /// Background as 8-bit r,g,b
    #[arg(long, default_value = "0,0,0")]
    pub bg: String,
    /// Rescale the rig's image sizes before rendering
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long, default_value_t = camprior::render::DEFAULT_TILE_SIZE)]
    pub tile_size: usize,
    #[arg(long, default_value_t = camprior::render::DEFAULT_Z_NEAR)]
    pub z_near: f64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum AugmentCommand {
    /// Write perturbed copies of a rig
    Sample {
        #[arg(long)]
        rig: String,
        /// Sampling ranges as JSON; built-in defaults when omitted
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        count: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Zoom an image about its principal point
    Resize {
        #[arg(long)]
        image: PathBuf,
        /// Intrinsics JSON: fu, fv, cu, cv, width, height
        #[arg(long)]
        intr: PathBuf,
        #[arg(long)]
        scale: f64,
        #[arg(short, long)]
        output: PathBuf,
        /// Write the scaled intrinsics here
        #[arg(long)]
        intr_out: Option<PathBuf>,
        /// Write the coverage mask (PGM) here
        #[arg(long)]
        mask_out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum MetricsCommand {
    /// NDS* for one result, or a PASS/FAIL check of every CSV row
    #[command(name = "nds-star")]
    NdsStar {
        #[arg(long, required_unless_present = "csv", requires_all = ["mate", "mase", "maoe"])]
        map: Option<f64>,
        #[arg(long)]
        mate: Option<f64>,
        #[arg(long)]
        mase: Option<f64>,
        #[arg(long)]
        maoe: Option<f64>,
        /// Rows with header table,setting,method,map,mate,mase,maoe,nds
        #[arg(long, conflicts_with = "map")]
        csv: Option<PathBuf>,
        #[arg(long, default_value_t = camprior::metrics::TABLE_TOLERANCE)]
        tolerance: f64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let settings = match Settings::resolve(&cli.global) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    env_logger::Builder::new().filter_level(settings.log_level).format_timestamp(None).init();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(settings.threads).build_global() {
        log::warn!("thread pool: {e}");
    }
    log::debug!("{settings:?}");
    match commands::run(cli.command, &settings) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::from(2)
        }
    }
}
