use std::fs;

use vilivo::config::RunConfig;
use vilivo::dataset::{generate_dataset, Dataset};
use vilivo::evaluation::{absolute_endpoint_error, Trajectory};
use vilivo::pipeline::{run_dataset, run_scenario};
use vilivo::simulator::{parking_loop, NoiseConfig};
use vilivo::tracker::{FrameStatus, Mode};

fn config(mode: Mode, frames: usize) -> RunConfig {
    let mut config = RunConfig::default();
    config.tracker.mode = mode;
    config.simulation.max_frames = frames;
    config
}

#[test]
fn dataset_run_matches_in_memory_run() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = parking_loop(1, 5.0);
    let cfg = config(Mode::ScanFeature, 25);
    generate_dataset(
        &scenario.world,
        &scenario.trajectory,
        scenario.wheelbase,
        &cfg.sensor,
        &cfg.noise,
        Some(25),
        dir.path(),
    )
    .unwrap();
    let dataset = Dataset::open(dir.path()).unwrap();
    assert_eq!(dataset.len(), 25);
    let from_disk = run_dataset(&dataset, &cfg).unwrap();
    let (in_memory, truth) = run_scenario(&scenario, &cfg).unwrap();
    assert_eq!(truth.len(), 25);
    // Feature positions pass through pixel coordinates on disk.
    for (a, b) in from_disk.outputs.iter().zip(&in_memory.outputs) {
        assert_eq!(a.status, b.status);
        assert!((a.world_pose.translation() - b.world_pose.translation()).norm() < 1e-6);
    }
    assert_eq!(from_disk.latencies.len(), 25);
}

#[test]
fn scan_only_ignores_feature_files() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = parking_loop(2, 5.0);
    let cfg = config(Mode::ScanOnly, 20);
    generate_dataset(
        &scenario.world,
        &scenario.trajectory,
        scenario.wheelbase,
        &cfg.sensor,
        &cfg.noise,
        Some(20),
        dir.path(),
    )
    .unwrap();
    let dataset = Dataset::open(dir.path()).unwrap();
    let full = run_dataset(&dataset, &cfg).unwrap();
    for k in 0..dataset.len() {
        fs::write(dataset.features_path(k), "id,x_px,y_px,descriptor\n").unwrap();
    }
    let stripped = run_dataset(&Dataset::open(dir.path()).unwrap(), &cfg).unwrap();
    assert_eq!(full.trajectory_rows(), stripped.trajectory_rows());
}

#[test]
fn noise_free_feature_only_short_run_is_exact() {
    let mut cfg = config(Mode::FeatureOnly, 60);
    cfg.noise = NoiseConfig::noise_free(0);
    let (result, truth) = run_scenario(&parking_loop(1, 5.0), &cfg).unwrap();
    let est = Trajectory::new(result.outputs.iter().map(|o| (o.timestamp, o.world_pose)).collect()).unwrap();
    let gt = Trajectory::new(truth.iter().map(|r| (r.timestamp, r.pose)).collect()).unwrap();
    let (m, deg) = absolute_endpoint_error(&est, &gt).unwrap();
    assert!(m < 1e-6 && deg < 1e-6, "{m} {deg}");
    assert_eq!(result.count_status(FrameStatus::OdometryFallback), 0);
    assert!(result.count_status(FrameStatus::NewKeyframe) >= 2);
}
