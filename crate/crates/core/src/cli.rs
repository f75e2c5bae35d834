//! Command-line front end: `simulate`, `run`, `eval` and `plot`.
//!
//! Exit status is 0 on success, 1 for invalid input and 2 for I/O
//! failures.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_float_list, RunConfig};
use crate::dataset::{generate_dataset, read_pose_csv, Dataset, PoseRow};
use crate::error::{Error, Result};
use crate::evaluation::{
    align_trajectories, default_segment_lengths, relative_error, Trajectory,
};
use crate::pipeline::{diagnostics_csv, run_dataset};
use crate::plot::{box_plot_svg, trajectory_svg, Metric};
use crate::tracker::{FrameStatus, Mode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_IO: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "vilivo", version, about = "Virtual-LiDAR visual odometry toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Simulate(SimulateArgs),
    /// Track a dataset and write trajectory.csv and diagnostics.csv.
    Run(RunArgs),
    /// Relative-error report of an estimate against ground truth.
    Eval(EvalArgs),
    /// Overlay trajectories in one SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory to create.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the noise seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Dataset directory; falls back to `[run] dataset`.
    dataset: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    /// Output directory; falls back to `[run] output`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides both RANSAC seeds.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    estimate: PathBuf,
    ground_truth: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated segment lengths in meters.
    #[arg(long, value_parser = parse_segments)]
    segments: Option<SegmentLengths>,
    #[arg(long, default_value_t = 100)]
    align_poses: usize,
    #[arg(long)]
    no_align: bool,
    /// Directory for the report CSV and box plots.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PlotArgs {
    #[arg(required = true)]
    trajectories: Vec<PathBuf>,
    /// SVG file to write.
    #[arg(long)]
    out: PathBuf,
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Clone)]
struct SegmentLengths(Vec<f64>);

fn parse_segments(s: &str) -> std::result::Result<SegmentLengths, String> {
    let v = parse_float_list(s)?;
    if v.is_empty() || v.iter().any(|l| !(*l > 0.0)) {
        return Err("segment lengths must be positive".into());
    }
    Ok(SegmentLengths(v))
}

fn exit_code(e: &Error) -> i32 {
    if e.is_io() {
        EXIT_IO
    } else {
        EXIT_VALIDATION
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_VALIDATION;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Run(a) => cmd_run(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Plot(a) => cmd_plot(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn cmd_simulate(args: SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        config.noise.seed = seed;
    }
    let sim = &config.simulation;
    let scenario = sim
        .scenario
        .build(sim.world_seed, sim.frame_rate_hz, sim.landmark_density);
    create_dir(&args.out)?;
    let max_frames = (sim.max_frames > 0).then_some(sim.max_frames);
    let frames = generate_dataset(
        &scenario.world,
        &scenario.trajectory,
        sim.wheelbase_m,
        &config.sensor,
        &config.noise,
        max_frames,
        &args.out,
    )?;
    write_file(&args.out.join("effective_config"), &config.to_ini())?;
    let _ = writeln!(out, "wrote {frames} frames to {}", args.out.display());
    Ok(())
}

fn cmd_run(args: RunArgs, out: &mut dyn Write) -> Result<()> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(mode) = args.mode {
        config.tracker.mode = mode;
    }
    if let Some(seed) = args.seed {
        config.tracker.feature_ransac.seed = seed;
        config.tracker.scan_ransac.seed = seed;
    }
    if args.dataset.is_some() {
        config.dataset = args.dataset;
    }
    if args.out.is_some() {
        config.output = args.out;
    }
    let dataset_dir = config
        .dataset
        .clone()
        .ok_or_else(|| Error::InvalidParameter("no dataset directory given".into()))?;
    let out_dir = config
        .output
        .clone()
        .ok_or_else(|| Error::InvalidParameter("no output directory given (--out)".into()))?;
    config.validate()?;

    let dataset = Dataset::open(&dataset_dir)?;
    let result = run_dataset(&dataset, &config)?;
    create_dir(&out_dir)?;
    crate::dataset::write_pose_csv(&out_dir.join("trajectory.csv"), &result.trajectory_rows(), true)?;
    write_file(&out_dir.join("diagnostics.csv"), &diagnostics_csv(&result.outputs))?;
    write_file(&out_dir.join("effective_config"), &config.to_ini())?;
    let _ = writeln!(
        out,
        "{} frames ({}): {} vo, {} new_keyframe, {} odometry_fallback",
        result.outputs.len(),
        config.tracker.mode,
        result.count_status(FrameStatus::Vo),
        result.count_status(FrameStatus::NewKeyframe),
        result.count_status(FrameStatus::OdometryFallback),
    );
    Ok(())
}

fn to_trajectory(rows: &[PoseRow], path: &Path) -> Result<Trajectory> {
    if rows.is_empty() {
        return Err(Error::format(path, "trajectory has no rows"));
    }
    Trajectory::new(rows.iter().map(|r| (r.timestamp, r.pose)).collect())
        .map_err(|e| Error::format(path, e.to_string()))
}

fn cmd_eval(args: EvalArgs, out: &mut dyn Write) -> Result<()> {
    let config = load_config(args.config.as_deref())?;
    let estimate = to_trajectory(&read_pose_csv(&args.estimate)?, &args.estimate)?;
    let truth = to_trajectory(&read_pose_csv(&args.ground_truth)?, &args.ground_truth)?;
    let align = config.evaluation.align && !args.no_align;
    let estimate = if align {
        align_trajectories(&estimate, &truth, args.align_poses, config.evaluation.with_scale)?.0
    } else {
        estimate
    };
    let lengths = match args.segments {
        Some(SegmentLengths(s)) => s,
        None if !config.evaluation.segments.is_empty() => config.evaluation.segments.clone(),
        None => default_segment_lengths(truth.path_length()),
    };
    let report = relative_error(&estimate, &truth, &lengths)?;
    create_dir(&args.out)?;
    report.write_csv(&args.out.join("relative_error.csv"))?;
    for metric in [Metric::TranslationPercent, Metric::RotationDegrees] {
        let path = args.out.join(format!("relative_error_{}.svg", metric.as_str()));
        write_file(&path, &box_plot_svg(&report, metric))?;
    }
    for seg in &report.segments {
        match seg.translation_summary() {
            Some(s) => {
                let _ = writeln!(out, "segment {} m: median translation RE {:.4}%", seg.length, s.median);
            }
            None => {
                let _ = writeln!(out, "segment {} m: no segments", seg.length);
            }
        }
    }
    // The estimate is already aligned when alignment is on.
    let (m, deg) = final_pose_difference(&estimate, &truth)?;
    let _ = writeln!(out, "endpoint error: {m:.4} m, {deg:.4} deg");
    Ok(())
}

fn final_pose_difference(estimate: &Trajectory, truth: &Trajectory) -> Result<(f64, f64)> {
    let (e, t) = *crate::evaluation::associate(estimate, truth)
        .last()
        .ok_or_else(|| Error::InvalidParameter("trajectories share no timestamps".into()))?;
    Ok((
        (e.translation() - t.translation()).norm(),
        crate::geometry::wrap_angle(e.theta - t.theta).abs().to_degrees(),
    ))
}

fn cmd_plot(args: PlotArgs, out: &mut dyn Write) -> Result<()> {
    let mut series = Vec::with_capacity(args.trajectories.len());
    for path in &args.trajectories {
        let rows = read_pose_csv(path)?;
        if rows.is_empty() {
            return Err(Error::format(path, "trajectory has no rows"));
        }
        series.push((path.display().to_string(), rows));
    }
    let svg = trajectory_svg(&series)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_file(&args.out, &svg)?;
    let _ = writeln!(out, "wrote {}", args.out.display());
    Ok(())
}
