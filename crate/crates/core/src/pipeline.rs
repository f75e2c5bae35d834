//! Streams frames through the tracker and formats its outputs.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use crate::config::RunConfig;
use crate::dataset::{Dataset, PoseRow};
use crate::error::Result;
use crate::feature_matcher::FeatureFrame;
use crate::geometry::OdomSample;
use crate::simulator::{render_frame, simulate_sequence, ScenarioSpec};
use crate::tracker::{Frame, Tracker, TrackerOutput};
use crate::virtual_lidar::FreeSpaceMask;

/// Tracker outputs plus the time spent in scan synthesis and tracking for
/// each frame.
#[derive(Debug, Clone, Default)]
pub struct RunResult {
    pub outputs: Vec<TrackerOutput>,
    pub latencies: Vec<Duration>,
}

impl RunResult {
    pub fn mean_latency(&self) -> Duration {
        if self.latencies.is_empty() {
            return Duration::ZERO;
        }
        self.latencies.iter().sum::<Duration>() / self.latencies.len() as u32
    }

    pub fn count_status(&self, status: crate::tracker::FrameStatus) -> usize {
        self.outputs.iter().filter(|o| o.status == status).count()
    }

    pub fn trajectory_rows(&self) -> Vec<PoseRow> {
        trajectory_rows(&self.outputs)
    }
}

/// Feeds frames in order. Loading time is excluded from the latencies.
pub fn run_frames<I>(frames: I, config: &RunConfig) -> Result<RunResult>
where
    I: IntoIterator<Item = Result<(FreeSpaceMask, FeatureFrame, OdomSample)>>,
{
    let mut tracker = Tracker::new(config.tracker.clone())?;
    let mut result = RunResult::default();
    for (index, item) in frames.into_iter().enumerate() {
        let (mask, features, odom) = item?;
        let start = Instant::now();
        let frame = Frame::from_mask(index, &mask, &features, odom, &config.lidar)?;
        let output = tracker.track(frame);
        result.latencies.push(start.elapsed());
        result.outputs.push(output);
    }
    Ok(result)
}

pub fn run_dataset(dataset: &Dataset, config: &RunConfig) -> Result<RunResult> {
    run_frames((0..dataset.len()).map(|k| dataset.load_frame(k)), config)
}

/// Renders the scenario in memory and tracks it, without touching disk.
pub fn run_scenario(scenario: &ScenarioSpec, config: &RunConfig) -> Result<(RunResult, Vec<PoseRow>)> {
    let seq = simulate_sequence(&scenario.trajectory, scenario.wheelbase, &config.noise)?;
    let limit = match config.simulation.max_frames {
        0 => seq.truth.len(),
        n => n.min(seq.truth.len()),
    };
    let frames = seq.truth[..limit].iter().zip(&seq.odometry).enumerate().map(|(k, ((t, pose), odom))| {
        let (mask, features) =
            render_frame(&scenario.world, pose, *t, &scenario.sensor, &config.noise, k as u64)?;
        Ok((mask, features, *odom))
    });
    let result = run_frames(frames, config)?;
    let truth = seq.truth[..limit]
        .iter()
        .enumerate()
        .map(|(frame, (timestamp, pose))| PoseRow {
            frame,
            timestamp: *timestamp,
            pose: *pose,
            status: None,
        })
        .collect();
    Ok((result, truth))
}

pub fn trajectory_rows(outputs: &[TrackerOutput]) -> Vec<PoseRow> {
    outputs
        .iter()
        .map(|o| PoseRow {
            frame: o.frame_index,
            timestamp: o.timestamp,
            pose: o.world_pose,
            status: Some(o.status.as_str().to_string()),
        })
        .collect()
}

pub const DIAGNOSTICS_HEADER: &str = "frame,status,fallback_reason,feature_candidates,feature_inliers,\
scan_candidates,scan_inliers,initial_cost,final_cost,solver_iterations,ba_cost";

pub fn diagnostics_csv(outputs: &[TrackerOutput]) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = String::from(DIAGNOSTICS_HEADER);
    out.push('\n');
    for o in outputs {
        let d = &o.diagnostics;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            o.frame_index,
            o.status,
            d.fallback.map(|f| f.as_str()).unwrap_or(""),
            d.feature_candidates,
            d.feature_inliers,
            d.scan_candidates,
            d.scan_inliers,
            opt(d.initial_cost),
            opt(d.final_cost),
            d.solver_iterations,
            opt(d.ba_cost),
        );
    }
    out
}
