//! Tracks the simulated parking loop in every mode and reports endpoint
//! error, status counts and per-frame latency.
//!
//! ```text
//! cargo run --release --example track_sequence -- [noisy]
//! ```

use vilivo::config::RunConfig;
use vilivo::evaluation::{absolute_endpoint_error, relative_error, Trajectory};
use vilivo::pipeline::run_scenario;
use vilivo::simulator::{parking_loop, NoiseConfig};
use vilivo::tracker::{FrameStatus, Mode};

fn main() -> vilivo::Result<()> {
    let noisy = std::env::args().any(|a| a == "noisy");
    let scenario = parking_loop(1, 5.0);
    for mode in Mode::ALL {
        let mut config = RunConfig::default();
        config.tracker.mode = mode;
        config.noise = if noisy { NoiseConfig::default() } else { NoiseConfig::noise_free(0) };
        let (result, truth) = run_scenario(&scenario, &config)?;
        let est = Trajectory::new(result.outputs.iter().map(|o| (o.timestamp, o.world_pose)).collect())?;
        let gt = Trajectory::new(truth.iter().map(|r| (r.timestamp, r.pose)).collect())?;
        let (m, deg) = absolute_endpoint_error(&est, &gt)?;
        let re = relative_error(&est, &gt, &[8.0])?;
        let t8 = re.segments[0].translation_summary().map_or(f64::NAN, |s| s.median);
        let r8 = re.segments[0].rotation_summary().map_or(f64::NAN, |s| s.median);
        println!(
            "{mode:>12}: endpoint {m:.4} m {deg:.4} deg | RE(8 m) {t8:.3}% {r8:.4} deg | vo {} kf {} fallback {} | {:.2} ms/frame",
            result.count_status(FrameStatus::Vo),
            result.count_status(FrameStatus::NewKeyframe),
            result.count_status(FrameStatus::OdometryFallback),
            result.mean_latency().as_secs_f64() * 1e3,
        );
    }
    Ok(())
}
