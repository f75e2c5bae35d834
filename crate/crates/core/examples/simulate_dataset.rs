//! Writes a short synthetic dataset to disk and tracks it back.
//!
//! ```text
//! cargo run --release --example simulate_dataset -- [DIR] [FRAMES]
//! ```

use std::path::PathBuf;

use vilivo::config::RunConfig;
use vilivo::dataset::{generate_dataset, Dataset};
use vilivo::pipeline::run_dataset;
use vilivo::simulator::parking_loop;

fn main() -> vilivo::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("vilivo_dataset"));
    let frames: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(50);
    let config = RunConfig::default();
    let scenario = parking_loop(config.simulation.world_seed, config.simulation.frame_rate_hz);
    std::fs::create_dir_all(&dir).map_err(|e| vilivo::Error::Io { path: dir.clone(), source: e })?;
    let written = generate_dataset(
        &scenario.world,
        &scenario.trajectory,
        scenario.wheelbase,
        &config.sensor,
        &config.noise,
        Some(frames),
        &dir,
    )?;
    println!("wrote {written} frames to {}", dir.display());

    let dataset = Dataset::open(&dir)?;
    let result = run_dataset(&dataset, &config)?;
    let truth = dataset.ground_truth()?;
    let last = result.outputs.last().expect("at least one frame");
    let gt = truth.last().expect("at least one frame");
    println!(
        "final pose ({:.3}, {:.3}) vs ground truth ({:.3}, {:.3})",
        last.world_pose.x, last.world_pose.y, gt.pose.x, gt.pose.y
    );
    Ok(())
}
