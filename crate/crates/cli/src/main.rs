//! `rgbdg`: batch front end for the grounding pipeline.
//!
//! Subcommands: `propose` (candidate boxes for one scene or a manifest),
//! `evaluate` (both modes over a dataset, with report file), `synth`
//! (deterministic synthetic scenes) and `overlay` (inspection renders).
//!
//! Exit codes: 0 success, 2 usage or input error, 3 internal invariant
//! violation. Malformed input never crashes the process.

mod commands;

use std::panic::AssertUnwindSafe;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rgbdg_core::clustering::{ActivityChannels, ClusteringConfig};
use rgbdg_core::fusion::FusionConfig;
use rgbdg_core::scene::{Category, Mode};
use rgbdg_core::segmentation::{Connectivity, RegionCountConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Rgbd,
    Rgb,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Rgbd => Mode::Rgbd,
            ModeArg::Rgb => Mode::Rgb,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CategoryArg {
    Easy,
    Difficult,
}

impl From<CategoryArg> for Category {
    fn from(c: CategoryArg) -> Self {
        match c {
            CategoryArg::Easy => Category::Easy,
            CategoryArg::Difficult => Category::Difficult,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ActivityChannelsArg {
    RedGreen,
    RedBlue,
}

fn parse_connectivity(s: &str) -> Result<u8, String> {
    match s {
        "4" => Ok(4),
        "8" => Ok(8),
        other => Err(format!("'{other}' is not a valid connectivity (4 or 8)")),
    }
}

/// Pipeline tunables, defaulting to the published operating point.
#[derive(Debug, Args)]
struct PipelineArgs {
    /// Fusion activation threshold on red/green channels.
    #[arg(long, default_value_t = 0.39)]
    t_rgb: f64,

    /// High-activity threshold used when counting regions.
    #[arg(long, default_value_t = 0.9)]
    high_activity_threshold: f64,

    /// Discard connected regions smaller than this many pixels.
    #[arg(long, default_value_t = 150)]
    min_region_area: usize,

    /// Count the background as one extra region.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    count_background: bool,

    /// Pixel connectivity for region counting (4 or 8).
    #[arg(long, default_value_t = 8, value_parser = parse_connectivity)]
    connectivity: u8,

    /// Gaussian filter size in pixels (odd).
    #[arg(long, default_value_t = 11)]
    kernel_size: usize,

    /// Gaussian filter standard deviation in pixels.
    #[arg(long, default_value_t = 2.0)]
    kernel_sigma: f64,

    /// Post-smoothing activity threshold for feature extraction.
    #[arg(long, default_value_t = 0.5)]
    active_threshold: f64,

    /// Channel pair tested by the post-smoothing activity rule.
    #[arg(long, value_enum, default_value_t = ActivityChannelsArg::RedGreen)]
    activity_channels: ActivityChannelsArg,

    /// Discard clusters smaller than this many pixels.
    #[arg(long, default_value_t = 150)]
    min_cluster_area: usize,

    /// Red-channel weight in the cluster activation score.
    #[arg(long, default_value_t = 0.7)]
    w_r: f64,

    /// Green-channel weight in the cluster activation score.
    #[arg(long, default_value_t = 0.3)]
    w_g: f64,

    /// K-means initialization seed.
    #[arg(long, default_value_t = 42)]
    seed: u64,

    /// K-means iteration cap.
    #[arg(long, default_value_t = 300)]
    max_iters: usize,

    /// K-means centroid-movement convergence tolerance.
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
}

impl PipelineArgs {
    fn fusion_config(&self) -> FusionConfig {
        FusionConfig { t_rgb: self.t_rgb }
    }

    fn region_config(&self) -> RegionCountConfig {
        RegionCountConfig {
            high_activity_threshold: self.high_activity_threshold,
            min_region_area: self.min_region_area,
            count_background: self.count_background,
            connectivity: if self.connectivity == 4 {
                Connectivity::Four
            } else {
                Connectivity::Eight
            },
        }
    }

    fn clustering_config(&self, mode: Mode) -> ClusteringConfig {
        ClusteringConfig {
            kernel_size: self.kernel_size,
            kernel_sigma: self.kernel_sigma,
            post_smooth_active_threshold: self.active_threshold,
            activity_channels: match self.activity_channels {
                ActivityChannelsArg::RedGreen => ActivityChannels::RedGreen,
                ActivityChannelsArg::RedBlue => ActivityChannels::RedBlue,
            },
            min_cluster_area: self.min_cluster_area,
            w_r: self.w_r,
            w_g: self.w_g,
            kmeans_seed: self.seed,
            kmeans_max_iters: self.max_iters,
            kmeans_tol: self.tol,
            mode,
        }
    }
}

/// Flags naming one scene, either through a manifest or as raw raster files.
#[derive(Debug, Args)]
struct SceneArgs {
    /// Dataset manifest (JSON).
    #[arg(long)]
    manifest: Option<PathBuf>,

    /// Scene to pick from the manifest, or an id for raw raster input.
    #[arg(long)]
    scene_id: Option<String>,

    /// RGB activation heatmap (.ppm or .csv).
    #[arg(long)]
    rgb_heatmap: Option<PathBuf>,

    /// Depth activation heatmap (.ppm or .csv); required in rgbd mode.
    #[arg(long)]
    depth_heatmap: Option<PathBuf>,

    /// Depth map (.pgm or .csv); required in rgbd mode.
    #[arg(long)]
    depth_map: Option<PathBuf>,

    /// Ground-truth box as x_min,y_min,x_max,y_max.
    #[arg(long, value_delimiter = ',', num_args = 4)]
    ground_truth: Option<Vec<u32>>,

    /// Referring expression attached to the scene.
    #[arg(long)]
    expression: Option<String>,

    /// Scene difficulty category.
    #[arg(long, value_enum, default_value_t = CategoryArg::Easy)]
    category: CategoryArg,
}

#[derive(Debug, Parser)]
#[command(
    name = "rgbdg",
    version,
    about = "Ground referring expressions in RGB-D scenes via heatmap fusion and clustering"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Produce ranked candidate boxes for one scene or a whole manifest.
    Propose {
        #[command(flatten)]
        scene: SceneArgs,

        /// Pipeline mode.
        #[arg(long, value_enum, default_value_t = ModeArg::Rgbd)]
        mode: ModeArg,

        /// Output proposals file (JSON Lines).
        #[arg(long)]
        out: PathBuf,

        /// Worker threads for manifest runs; affects wall time only.
        #[arg(long, default_value_t = 1)]
        workers: usize,

        #[command(flatten)]
        pipeline: PipelineArgs,
    },

    /// Run the pipeline over a manifest in one or both modes and score the
    /// candidates against ground truth.
    Evaluate {
        /// Dataset manifest (JSON).
        #[arg(long)]
        manifest: PathBuf,

        /// Modes to evaluate, comma separated.
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [ModeArg::Rgbd, ModeArg::Rgb])]
        modes: Vec<ModeArg>,

        /// Output report file (JSON).
        #[arg(long)]
        report: PathBuf,

        /// Also write every proposal set to this JSON Lines file.
        #[arg(long)]
        proposals_out: Option<PathBuf>,

        /// Worker threads; affects wall time only, never output bytes.
        #[arg(long, default_value_t = 1)]
        workers: usize,

        #[command(flatten)]
        pipeline: PipelineArgs,
    },

    /// Generate deterministic synthetic scenes plus their manifest.
    Synth {
        /// Built-in scenario family.
        #[arg(long, value_enum, conflicts_with = "spec")]
        preset: Option<PresetArg>,

        /// Scene spec as a JSON file, for custom scenarios.
        #[arg(long)]
        spec: Option<PathBuf>,

        /// Number of scenes to generate from the preset.
        #[arg(long, default_value_t = 1)]
        count: u64,

        /// Base seed; scene k uses seed + k.
        #[arg(long, default_value_t = 1)]
        seed: u64,

        /// Uniform noise amplitude applied to heatmap channels.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,

        /// Output directory; one subdirectory per scene plus manifest.json.
        #[arg(long)]
        out: PathBuf,
    },

    /// Render a scene's working heatmap with ground-truth and candidate
    /// boxes outlined.
    Overlay {
        #[command(flatten)]
        scene: SceneArgs,

        /// Proposals file written by `propose` or `evaluate`.
        #[arg(long)]
        proposals: PathBuf,

        /// Pick this mode's proposal set when the file holds several.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,

        /// Output image (binary PPM).
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PresetArg {
    /// Two identical blobs that only depth can tell apart.
    DepthCritical,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match std::panic::catch_unwind(AssertUnwindSafe(|| commands::run(cli.command))) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
        Err(_) => {
            // The default panic hook has already printed the message.
            eprintln!("internal error: invariant violation");
            ExitCode::from(3)
        }
    }
}
