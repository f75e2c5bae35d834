//! Relative-error report for an estimate with a slow heading drift,
//! before and after alignment over the initial poses.
//!
//! ```text
//! cargo run --release --example evaluate
//! ```

use vilivo::evaluation::{align_trajectories, default_segment_lengths, relative_error, Trajectory, DEFAULT_ALIGN_POSES};
use vilivo::simulator::{parking_loop, simulate_trajectory};
use vilivo::Pose2;

fn main() -> vilivo::Result<()> {
    let scenario = parking_loop(1, 5.0);
    let truth = Trajectory::new(simulate_trajectory(&scenario.trajectory, scenario.wheelbase)?)?;

    // Estimate starts in a rotated frame and accumulates 0.5 mrad of
    // heading error per meter.
    let offset = Pose2::new(1.0, -2.0, 0.3);
    let samples = truth.samples();
    let mut drifted = samples[0].1;
    let mut est = vec![(samples[0].0, offset.compose(&drifted))];
    for w in samples.windows(2) {
        let step = w[0].1.relative(&w[1].1);
        drifted = drifted.compose(&Pose2::new(step.x, step.y, step.theta + 5e-4 * step.translation_norm()));
        est.push((w[1].0, offset.compose(&drifted)));
    }
    let est = Trajectory::new(est)?;
    let lengths = default_segment_lengths(truth.path_length());
    println!("path {:.1} m, segments {:?}", truth.path_length(), lengths);

    let (aligned, fit) = align_trajectories(&est, &truth, DEFAULT_ALIGN_POSES, false)?;
    println!("alignment rotation {:.4} rad, scale {}", fit.rotation, fit.scale);
    let report = relative_error(&aligned, &truth, &lengths)?;
    print!("{}", report.to_csv());
    Ok(())
}
