//! Fused robust relative-pose estimate from feature and scan
//! correspondences, with a share of gross feature outliers.
//!
//! ```text
//! cargo run --release --example relative_pose
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vilivo::feature_matcher::{Descriptor, Feature, FeatureCorrespondence};
use vilivo::robust_estimation::{estimate_relative_pose, FusionWeights, TermLosses};
use vilivo::scan_matcher::ScanCorrespondence;
use vilivo::{Point2, Pose2};

fn feature(id: u64, position: Point2) -> Feature {
    Feature {
        id,
        position,
        descriptor: Descriptor::default(),
    }
}

fn main() -> vilivo::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let truth = Pose2::new(0.42, -0.17, 0.08);
    let mut point = || Point2::new(rng.random_range(-7.0..7.0), rng.random_range(-7.0..7.0));
    let mut features = Vec::new();
    for i in 0..200 {
        let p = point();
        let target = if i % 10 == 0 { point() } else { truth.transform_point(&p) };
        features.push(FeatureCorrespondence {
            current: feature(i, p),
            keyframe: feature(i, target),
            current_index: i as usize,
            keyframe_index: i as usize,
            descriptor_distance: 0,
        });
    }
    let scans: Vec<_> = (0..150)
        .map(|_| {
            let q = point();
            ScanCorrespondence {
                current_point: q,
                reference_point: truth.transform_point(&q),
            }
        })
        .collect();

    let est = estimate_relative_pose(
        &features,
        &scans,
        Pose2::IDENTITY,
        &FusionWeights::default(),
        &TermLosses::default(),
    )?;
    println!("truth    ({:.6}, {:.6}, {:.6})", truth.x, truth.y, truth.theta);
    println!("estimate ({:.6}, {:.6}, {:.6})", est.pose.x, est.pose.y, est.pose.theta);
    println!(
        "cost {:.4} -> {:.4} in {} iterations",
        est.initial_cost, est.final_cost, est.iterations
    );
    Ok(())
}
