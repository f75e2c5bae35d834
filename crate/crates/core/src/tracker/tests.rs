use super::*;
use crate::feature_matcher::Feature;
use crate::geometry::ackermann_predict;
use crate::simulator::{analytic_scan, observe_features, parking_loop_world, render_frame, NoiseConfig, SensorConfig, World};

fn odom(t: f64, pose: Pose2) -> OdomSample {
    OdomSample::new(t, pose)
}

fn bare_frame(index: usize, t: f64, pose: Pose2) -> Frame {
    Frame::new(
        index,
        VirtualScan::empty(1f64.to_radians()),
        FeatureFrame::default(),
        odom(t, pose),
    )
}

#[test]
fn predict_motion_composes_odometry_increment() {
    let mut prev = bare_frame(3, 0.3, Pose2::new(2.0, 1.0, 0.4));
    prev.estimated_pose_in_keyframe = Pose2::new(0.3, -0.1, 0.05);
    let same = predict_motion(&prev, &prev.odom);
    let e = prev.estimated_pose_in_keyframe;
    assert!((same.x - e.x).abs() < 1e-12 && (same.y - e.y).abs() < 1e-12 && (same.theta - e.theta).abs() < 1e-12);

    let ahead = odom(0.4, prev.odom.pose.compose(&Pose2::new(1.0, 0.0, 0.0)));
    let p = predict_motion(&prev, &ahead);
    let expected = prev.estimated_pose_in_keyframe.compose(&Pose2::new(1.0, 0.0, 0.0));
    assert!((p.x - expected.x).abs() < 1e-12 && (p.y - expected.y).abs() < 1e-12);

    // odometry following a 5 m radius arc
    let start = Pose2::new(-1.0, 3.0, 0.7);
    let wheelbase = 2.5;
    let steering = 0.5f64.atan();
    let arc_end = ackermann_predict(&start, 1.0, steering, wheelbase, 1.3).unwrap();
    let mut prev = bare_frame(0, 0.0, start);
    prev.estimated_pose_in_keyframe = Pose2::IDENTITY;
    let p = predict_motion(&prev, &odom(1.3, arc_end));
    let closed_form = ackermann_predict(&Pose2::IDENTITY, 1.0, steering, wheelbase, 1.3).unwrap();
    assert!((p.x - closed_form.x).abs() < 1e-9);
    assert!((p.y - closed_form.y).abs() < 1e-9);
    assert!((p.theta - closed_form.theta).abs() < 1e-9);
}

#[test]
fn keyframe_thresholds() {
    let cfg = TrackerConfig::default();
    let zero = Pose2::IDENTITY;
    assert!(should_create_keyframe(&Pose2::new(1.6, 0.0, 0.0), 0.1, &zero, &cfg));
    assert!(should_create_keyframe(&Pose2::new(0.0, 0.0, 0.7), 0.1, &zero, &cfg));
    assert!(should_create_keyframe(&Pose2::new(0.1, 0.0, 0.05), 3.5, &zero, &cfg));
    assert!(!should_create_keyframe(&Pose2::new(1.4, 0.0, 0.5), 2.9, &zero, &cfg));
    assert!(should_create_keyframe(&zero, 0.1, &Pose2::new(0.0, 1.6, 0.0), &cfg));
}

#[test]
fn promotion_composes_world_pose() {
    let first = promote_keyframe(&Pose2::IDENTITY, bare_frame(0, 0.0, Pose2::IDENTITY), &Pose2::IDENTITY);
    assert_eq!(first.world_pose, Pose2::IDENTITY);
    let rel = Pose2::new(1.5, 0.2, 0.1);
    let next = promote_keyframe(&first.world_pose, bare_frame(1, 1.0, rel), &rel);
    assert_eq!(next.world_pose, rel);
    assert_eq!(next.frame.estimated_pose_in_keyframe, Pose2::IDENTITY);
}

#[test]
fn mode_parsing() {
    for m in Mode::ALL {
        assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
    }
    assert!("both".parse::<Mode>().is_err());
    let cfg = TrackerConfig::with_mode(Mode::ScanOnly);
    assert_eq!(cfg.effective_weights().w_feature, 0.0);
    assert_eq!(cfg.effective_weights().w_scan, 0.1);
}

fn world_frame(world: &World, index: usize, t: f64, pose: Pose2) -> Frame {
    let noise = NoiseConfig::noise_free(0);
    let (mask, feats) =
        render_frame(world, &pose, t, &SensorConfig::default(), &noise, index as u64).unwrap();
    Frame::from_mask(index, &mask, &feats, odom(t, pose), &VirtualLidarParams::default()).unwrap()
}

#[test]
fn identical_frame_tracks_to_identity() {
    let world = parking_loop_world(2);
    let start = Pose2::new(3.0, 0.0, 0.0);
    for mode in Mode::ALL {
        let mut tracker = Tracker::new(TrackerConfig::with_mode(mode)).unwrap();
        let f0 = world_frame(&world, 0, 0.0, start);
        let mut f1 = f0.clone();
        f1.index = 1;
        f1.timestamp = 0.1;
        f1.odom.timestamp = 0.1;
        assert_eq!(tracker.track(f0).status, FrameStatus::NewKeyframe);
        let out = tracker.track(f1);
        assert_eq!(out.status, FrameStatus::Vo, "{mode}");
        assert!(out.relative_pose.translation_norm() < 1e-9 && out.relative_pose.theta.abs() < 1e-9);
    }
}

#[test]
fn noise_free_frame_half_meter_ahead() {
    let world = parking_loop_world(2);
    let start = Pose2::new(3.0, 0.0, 0.0);
    let ahead = start.compose(&Pose2::new(0.5, 0.0, 0.0));
    let mut tracker = Tracker::new(TrackerConfig::with_mode(Mode::FeatureOnly)).unwrap();
    tracker.track(world_frame(&world, 0, 0.0, start));
    let out = tracker.track(world_frame(&world, 1, 0.1, ahead));
    assert_eq!(out.status, FrameStatus::Vo);
    assert!((out.relative_pose.x - 0.5).abs() < 1e-6, "{}", out.relative_pose);
    assert!(out.relative_pose.y.abs() < 1e-6 && out.relative_pose.theta.abs() < 1e-6);
}

#[test]
fn starved_frame_falls_back_to_odometry() {
    let mut tracker = Tracker::new(TrackerConfig::default()).unwrap();
    tracker.track(bare_frame(0, 0.0, Pose2::new(1.0, 1.0, 0.2)));
    let next = Pose2::new(1.3, 1.1, 0.25);
    let out = tracker.track(bare_frame(1, 0.1, next));
    assert_eq!(out.status, FrameStatus::OdometryFallback);
    assert_eq!(out.diagnostics.fallback, Some(FallbackReason::NoUsableTerm));
    let expected = Pose2::new(1.0, 1.0, 0.2).relative(&next);
    assert_eq!(out.relative_pose, expected);
    assert_eq!(out.world_pose, expected);
}

#[test]
fn feature_only_ignores_scans_bitwise() {
    let world = parking_loop_world(4);
    let poses: Vec<Pose2> = (0..12).map(|k| Pose2::new(2.0 + 0.12 * k as f64, 0.01 * k as f64, 0.004 * k as f64)).collect();
    let frames: Vec<Frame> = poses
        .iter()
        .enumerate()
        .map(|(k, p)| world_frame(&world, k, k as f64 * 0.2, *p))
        .collect();
    let run = |strip: bool| {
        let mut t = Tracker::new(TrackerConfig::with_mode(Mode::FeatureOnly)).unwrap();
        frames
            .iter()
            .cloned()
            .map(|mut f| {
                if strip {
                    f.scan = VirtualScan::empty(f.scan.angle_increment);
                }
                t.track(f)
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(run(false), run(true));
}

/// Keyframe plus window built from exact geometry: features by landmark id
/// and scan pairs by transforming analytic returns with the true pose.
fn exact_window(world: &World, kf_pose: Pose2, steps: &[Pose2]) -> (Keyframe, Vec<Frame>, Vec<Pose2>) {
    let mask = FreeSpaceMask::all_free(384, crate::virtual_lidar::DEFAULT_SCALE).unwrap();
    let noise = NoiseConfig::noise_free(0);
    let kf_feats = observe_features(world, &kf_pose, &mask, &noise, 0);
    let kf_frame = Frame::new(0, VirtualScan::empty(0.1), kf_feats.clone(), odom(0.0, kf_pose));
    let keyframe = promote_keyframe(&kf_pose, kf_frame, &Pose2::IDENTITY);
    let mut window = Vec::new();
    let mut truth = Vec::new();
    for (k, pose) in steps.iter().enumerate() {
        let rel = kf_pose.relative(pose);
        let feats = observe_features(world, pose, &mask, &noise, k as u64 + 1);
        let mut frame = Frame::new(k + 1, VirtualScan::empty(0.1), feats.clone(), odom(0.1 * (k + 1) as f64, *pose));
        for (ci, f) in feats.features.iter().enumerate() {
            if let Some(ki) = kf_feats.features.iter().position(|g: &Feature| g.id == f.id) {
                frame.feature_matches.push(FeatureCorrespondence {
                    current: *f,
                    keyframe: kf_feats.features[ki],
                    current_index: ci,
                    keyframe_index: ki,
                    descriptor_distance: 0,
                });
            }
        }
        let scan = analytic_scan(world, pose, 1f64.to_radians(), 1e3);
        frame.scan_matches = scan
            .points
            .iter()
            .map(|p| ScanCorrespondence {
                current_point: p.point,
                reference_point: rel.transform_point(&p.point),
            })
            .collect();
        frame.estimated_pose_in_keyframe = rel;
        window.push(frame);
        truth.push(rel);
    }
    (keyframe, window, truth)
}

fn straight_steps(n: usize) -> Vec<Pose2> {
    (1..=n).map(|k| Pose2::new(3.0 + 0.15 * k as f64, 0.02 * k as f64, 0.01 * k as f64)).collect()
}

#[test]
fn bundle_adjustment_recovers_exact_window() {
    let world = parking_loop_world(6);
    let kf_pose = Pose2::new(3.0, 0.0, 0.0);
    let (keyframe, mut window, truth) = exact_window(&world, kf_pose, &straight_steps(10));
    assert!(window.iter().all(|f| f.feature_matches.len() >= 50 && f.scan_matches.len() >= 60));
    for (k, f) in window.iter_mut().enumerate() {
        let e = 0.01 * (k as f64 + 1.0);
        f.estimated_pose_in_keyframe = f.estimated_pose_in_keyframe.compose(&Pose2::new(e, -e, 0.5 * e));
    }
    let ba = local_bundle_adjustment(&window, &keyframe, &FusionWeights::default(), &TermLosses::default()).unwrap();
    assert!(ba.final_cost() < 1e-12, "{}", ba.final_cost());
    for w in ba.cost_trace.windows(2) {
        assert!(w[1] <= w[0]);
    }
    for (p, t) in ba.poses.iter().zip(&truth) {
        assert!((p.x - t.x).abs() < 1e-6 && (p.y - t.y).abs() < 1e-6 && (p.theta - t.theta).abs() < 1e-6);
    }
}

#[test]
fn bundle_adjustment_fixed_point_and_scan_only() {
    let world = parking_loop_world(6);
    let kf_pose = Pose2::new(3.0, 0.0, 0.0);
    let (keyframe, window, truth) = exact_window(&world, kf_pose, &straight_steps(5));
    let ba = local_bundle_adjustment(&window, &keyframe, &FusionWeights::default(), &TermLosses::default()).unwrap();
    for (p, t) in ba.poses.iter().zip(&truth) {
        assert!((p.x - t.x).abs() < 1e-12 && (p.y - t.y).abs() < 1e-12 && (p.theta - t.theta).abs() < 1e-12);
    }
    for (a, b) in ba.feature_points.iter().zip(&keyframe.feature_points) {
        assert!((a - b).norm() < 1e-12);
    }

    let mut perturbed = window.clone();
    perturbed[2].estimated_pose_in_keyframe.x += 0.05;
    let scan_only = FusionWeights { w_feature: 0.0, w_scan: 0.1 };
    let ba = local_bundle_adjustment(&perturbed, &keyframe, &scan_only, &TermLosses::default()).unwrap();
    assert_eq!(ba.feature_points, keyframe.feature_points);
    assert!((ba.poses[2].x - truth[2].x).abs() < 1e-6);
}

#[test]
fn bundle_adjustment_without_residuals_is_noop() {
    let frames = vec![bare_frame(1, 0.1, Pose2::new(0.2, 0.0, 0.0))];
    let keyframe = promote_keyframe(&Pose2::IDENTITY, bare_frame(0, 0.0, Pose2::IDENTITY), &Pose2::IDENTITY);
    let mut frames = frames;
    frames[0].estimated_pose_in_keyframe = Pose2::new(0.2, 0.0, 0.0);
    let ba = local_bundle_adjustment(&frames, &keyframe, &FusionWeights::default(), &TermLosses::default()).unwrap();
    assert_eq!(ba.poses, vec![Pose2::new(0.2, 0.0, 0.0)]);
    assert_eq!(ba.iterations, 0);
}
