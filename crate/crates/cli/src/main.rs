//! `spelaeo` command-line front end.

mod commands;

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "spelaeo", version, about = "Post-processing for diver-collected cave mapping data")]
struct Cli {
    /// Only print warnings and errors.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synchronize a trajectory with a depth log and replace its z by depth.
    FuseDepth(FuseDepthArgs),
    /// Express one trajectory in another's frame via a shared fiducial target.
    Align(AlignArgs),
    /// Build the centerline graph and LRUD boundaries.
    Skeleton(SkeletonArgs),
    /// Export keyframes around a central pose as a pose-prior manifest.
    SelectArea(SelectAreaArgs),
    /// Caveline survey tools.
    #[command(subcommand)]
    Survey(SurveyCommand),
    /// Write a synthetic corridor dataset with ground truth.
    Synth(SynthArgs),
    /// Run the full chain described by a config file.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct FuseDepthArgs {
    #[arg(long)]
    pub trajectory: PathBuf,
    #[arg(long)]
    pub depth_log: PathBuf,
    /// Common resampling rate (Hz).
    #[arg(long, default_value_t = spelaeo_core::depth::DEFAULT_RATE_HZ)]
    pub rate: f64,
    /// Largest clock offset searched (s).
    #[arg(long, default_value_t = spelaeo_core::depth::DEFAULT_MAX_SHIFT_S)]
    pub max_shift: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct AlignArgs {
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub ref_obs: PathBuf,
    #[arg(long)]
    pub mov: PathBuf,
    #[arg(long)]
    pub mov_obs: PathBuf,
    /// Largest gap between an observation and its keyframe (s).
    #[arg(long, default_value_t = spelaeo_core::align::DEFAULT_ASSOCIATION_TOLERANCE_S)]
    pub tolerance: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct SkeletonArgs {
    #[arg(long = "traj", required = true)]
    pub trajectories: Vec<PathBuf>,
    /// Which `--traj` (0-based) seeds the centerline.
    #[arg(long, default_value_t = 0)]
    pub center_index: usize,
    #[arg(long)]
    pub cloud: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub flag_radius: f64,
    #[arg(long, default_value_t = 0.2)]
    pub depth_tol: f64,
    #[arg(long, default_value_t = 0.5)]
    pub lateral_radius: f64,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct SelectAreaArgs {
    #[arg(long = "traj", required = true)]
    pub trajectories: Vec<PathBuf>,
    #[arg(long)]
    pub center_traj: PathBuf,
    /// The keyframe nearest this time is the center pose.
    #[arg(long)]
    pub center_time: f64,
    #[arg(long)]
    pub radius: f64,
    /// Image id template with `{camera}` and `{timestamp}` placeholders.
    #[arg(long, default_value = spelaeo_core::recon::DEFAULT_IMAGE_PATTERN)]
    pub image_pattern: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum SurveyCommand {
    /// Least-squares loop closure.
    Adjust(SurveyAdjustArgs),
    /// Plan-view SVG of the caveline.
    Stickmap(StickmapArgs),
}

#[derive(Debug, Args)]
pub struct SurveyInput {
    #[arg(long)]
    pub shots: PathBuf,
    #[arg(long)]
    pub closures: Option<PathBuf>,
    /// Defaults to the first station of the shot list.
    #[arg(long)]
    pub anchor: Option<String>,
    /// Magnetic declination in degrees, east positive.
    #[arg(long, default_value_t = 0.0)]
    pub declination: f64,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct SurveyAdjustArgs {
    #[command(flatten)]
    pub input: SurveyInput,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub residuals: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct StickmapArgs {
    #[command(flatten)]
    pub input: SurveyInput,
    /// Draw the dead-reckoned traverse instead of the adjusted one.
    #[arg(long)]
    pub raw: bool,
    #[arg(long)]
    pub svg: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Corridor description; built-in defaults when omitted.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct PipelineArgs {
    /// Inputs are resolved relative to this file's directory.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub reference: Option<String>,
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub max_shift: Option<f64>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub flag_radius: Option<f64>,
    #[arg(long)]
    pub depth_tol: Option<f64>,
}

fn init_logging(quiet: bool) {
    let default = if quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SPELAEO_LOG", default))
        .format(|buf, record| writeln!(buf, "[{}] {}", record.level(), record.args()))
        .target(env_logger::Target::Stderr)
        .init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    init_logging(cli.quiet);
    let result = match cli.command {
        Command::FuseDepth(a) => commands::fuse_depth(&a),
        Command::Align(a) => commands::align(&a),
        Command::Skeleton(a) => commands::skeleton(&a),
        Command::SelectArea(a) => commands::select_area(&a),
        Command::Survey(SurveyCommand::Adjust(a)) => commands::survey_adjust(&a),
        Command::Survey(SurveyCommand::Stickmap(a)) => commands::survey_stickmap(&a),
        Command::Synth(a) => commands::synth(&a),
        Command::Pipeline(a) => commands::pipeline(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
