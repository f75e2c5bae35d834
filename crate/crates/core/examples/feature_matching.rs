//! Direct feature matching between two frames followed by RANSAC.
//!
//! ```text
//! cargo run --release --example feature_matching
//! ```

use vilivo::feature_matcher::{direct_match, DirectMatchParams};
use vilivo::robust_estimation::{ransac_se2, RansacParams};
use vilivo::simulator::{observe_features, parking_loop, NoiseConfig};
use vilivo::virtual_lidar::{FreeSpaceMask, DEFAULT_SCALE, DEFAULT_SIZE_PX};
use vilivo::Pose2;

fn main() -> vilivo::Result<()> {
    let scenario = parking_loop(1, 5.0);
    let mask = FreeSpaceMask::all_free(DEFAULT_SIZE_PX, DEFAULT_SCALE)?;
    let noise = NoiseConfig::default();
    let keyframe_pose = Pose2::new(5.0, 0.5, 0.1);
    let current_pose = keyframe_pose.compose(&Pose2::new(0.8, 0.05, 0.04));
    let keyframe = observe_features(&scenario.world, &keyframe_pose, &mask, &noise, 0);
    let current = observe_features(&scenario.world, &current_pose, &mask, &noise, 1);
    let truth = keyframe_pose.relative(&current_pose);

    // Odometry-like prediction, a few centimeters off.
    let predicted = truth.compose(&Pose2::new(0.03, -0.02, 0.005));
    let matches = direct_match(&current, &keyframe, &predicted, &DirectMatchParams::default())?;
    let correct = matches.iter().filter(|m| m.current.id == m.keyframe.id).count();
    println!(
        "{} current / {} keyframe features, {} matched ({} with the same landmark)",
        current.features.len(),
        keyframe.features.len(),
        matches.len(),
        correct
    );

    let pairs: Vec<_> = matches.iter().map(|m| (m.current.position, m.keyframe.position)).collect();
    let ransac = ransac_se2(&pairs, &RansacParams::default())?;
    println!(
        "RANSAC: {} inliers, pose ({:.4}, {:.4}, {:.3} deg) vs truth ({:.4}, {:.4}, {:.3} deg)",
        ransac.inlier_count,
        ransac.pose.x,
        ransac.pose.y,
        ransac.pose.theta.to_degrees(),
        truth.x,
        truth.y,
        truth.theta.to_degrees()
    );
    Ok(())
}
