//! Point-to-line ICP between two scans of a rectangular room.
//!
//! ```text
//! cargo run --release --example scan_matching
//! ```

use vilivo::scan_matcher::{match_scans, ScanMatchParams};
use vilivo::simulator::room_scan;
use vilivo::Pose2;

fn main() -> vilivo::Result<()> {
    let increment = 1f64.to_radians();
    let params = ScanMatchParams::default();
    let truths = [
        Pose2::new(0.3, -0.2, 5f64.to_radians()),
        Pose2::new(-0.45, 0.1, -9f64.to_radians()),
        Pose2::new(0.05, 0.4, 2f64.to_radians()),
    ];
    for truth in truths {
        let reference = room_scan(10.0, 7.0, &Pose2::IDENTITY, increment);
        let current = room_scan(10.0, 7.0, &truth, increment);
        let result = match_scans(&current, &reference, Pose2::IDENTITY, &params)?;
        println!(
            "truth ({:+.3}, {:+.3}, {:+.2} deg) -> estimate ({:+.6}, {:+.6}, {:+.4} deg) in {} iterations, {} pairs, converged {}",
            truth.x,
            truth.y,
            truth.theta.to_degrees(),
            result.pose.x,
            result.pose.y,
            result.pose.theta.to_degrees(),
            result.iterations,
            result.correspondences.len(),
            result.converged
        );
    }
    Ok(())
}
