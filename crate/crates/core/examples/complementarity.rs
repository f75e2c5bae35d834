//! Drives past an obstacle-free textured stretch and then a bare stretch
//! lined with parked cars, and shows where each mode falls back to
//! odometry.
//!
//! ```text
//! cargo run --release --example complementarity -- [noisy]
//! ```

use vilivo::config::RunConfig;
use vilivo::pipeline::run_scenario;
use vilivo::simulator::{complementarity_world, NoiseConfig};
use vilivo::tracker::{FrameStatus, Mode};

fn main() -> vilivo::Result<()> {
    let scenario = complementarity_world(1, 10.0);
    for mode in Mode::ALL {
        let mut config = RunConfig::default();
        config.tracker.mode = mode;
        if std::env::args().all(|a| a != "noisy") {
            config.noise = NoiseConfig::noise_free(0);
        }
        let (result, truth) = run_scenario(&scenario, &config)?;
        let fallback_x: Vec<f64> = result
            .outputs
            .iter()
            .zip(&truth)
            .filter(|(o, _)| o.status == FrameStatus::OdometryFallback)
            .map(|(_, t)| t.pose.x)
            .collect();
        let span = match (fallback_x.first(), fallback_x.last()) {
            (Some(a), Some(b)) => format!("x in [{a:.1}, {b:.1}] m"),
            _ => "none".to_string(),
        };
        let n = result.outputs.len() as f64;
        println!(
            "{mode:>12}: vo {:.1}%  new_keyframe {}  fallback {} ({span})",
            100.0 * result.count_status(FrameStatus::Vo) as f64 / n,
            result.count_status(FrameStatus::NewKeyframe),
            fallback_x.len(),
        );
    }
    Ok(())
}
