//! Runs the tracker over the first frames of the parking loop and prints
//! each local bundle adjustment it performs.
//!
//! ```text
//! cargo run --release --example bundle_adjustment
//! ```

use vilivo::config::RunConfig;
use vilivo::simulator::{parking_loop, render_frame, simulate_sequence};
use vilivo::tracker::{Frame, Tracker};

fn main() -> vilivo::Result<()> {
    let scenario = parking_loop(1, 5.0);
    let config = RunConfig::default();
    let seq = simulate_sequence(&scenario.trajectory, scenario.wheelbase, &config.noise)?;
    let mut tracker = Tracker::new(config.tracker.clone())?;
    for (k, ((t, pose), odom)) in seq.truth.iter().zip(&seq.odometry).enumerate().take(40) {
        let (mask, features) = render_frame(&scenario.world, pose, *t, &scenario.sensor, &config.noise, k as u64)?;
        let frame = Frame::from_mask(k, &mask, &features, *odom, &config.lidar)?;
        let out = tracker.track(frame);
        if let (Some(cost), Some(ba)) = (out.diagnostics.ba_cost, tracker.last_bundle_adjustment()) {
            println!(
                "frame {k:2}: window {:2} poses, {:3} points, cost {:.3e} -> {cost:.3e} in {} iterations, pose err {:.4} m",
                ba.poses.len(),
                ba.feature_points.len(),
                ba.cost_trace.first().copied().unwrap_or(cost),
                ba.iterations,
                (out.world_pose.translation() - pose.translation()).norm()
            );
        }
    }
    Ok(())
}
