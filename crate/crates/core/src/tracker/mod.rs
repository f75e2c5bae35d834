//! Keyframe tracking loop: per-frame relative pose against the current
//! keyframe, odometry fallback, keyframe promotion and local BA.

mod bundle_adjustment;

use std::fmt;
use std::str::FromStr;

pub use bundle_adjustment::{local_bundle_adjustment, local_bundle_adjustment_with, BundleAdjustmentResult};

use crate::error::{Error, Result};
use crate::feature_matcher::{apply_roi, direct_match, DirectMatchParams, FeatureCorrespondence, FeatureFrame};
use crate::geometry::{wrap_angle, OdomSample, Point2, Pose2};
use crate::robust_estimation::{
    estimate_relative_pose, ransac_se2, FusionWeights, RansacParams, TermLosses,
};
use crate::scan_matcher::{match_scans, ScanCorrespondence, ScanMatchParams};
use crate::virtual_lidar::{make_scan, FreeSpaceMask, VirtualLidarParams, VirtualScan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    ScanOnly,
    FeatureOnly,
    ScanFeature,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::ScanOnly, Mode::FeatureOnly, Mode::ScanFeature];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::ScanOnly => "scan_only",
            Mode::FeatureOnly => "feature_only",
            Mode::ScanFeature => "scan_feature",
        }
    }

    pub fn uses_features(&self) -> bool {
        !matches!(self, Mode::ScanOnly)
    }

    pub fn uses_scans(&self) -> bool {
        !matches!(self, Mode::FeatureOnly)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown mode `{s}` (expected scan_only, feature_only or scan_feature)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameStatus {
    Vo,
    OdometryFallback,
    NewKeyframe,
}

impl FrameStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            FrameStatus::Vo => "vo",
            FrameStatus::OdometryFallback => "odometry_fallback",
            FrameStatus::NewKeyframe => "new_keyframe",
        }
    }
}

impl fmt::Display for FrameStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FrameStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vo" => Ok(FrameStatus::Vo),
            "odometry_fallback" => Ok(FrameStatus::OdometryFallback),
            "new_keyframe" => Ok(FrameStatus::NewKeyframe),
            _ => Err(Error::InvalidParameter(format!("unknown status `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub mode: Mode,
    /// Keyframe triggers: meters, radians, seconds.
    pub kf_translation: f64,
    pub kf_rotation: f64,
    pub kf_time: f64,
    /// Maximum VO-vs-odometry disagreement before falling back.
    pub fallback_translation: f64,
    pub fallback_rotation: f64,
    pub max_window: usize,
    pub weights: FusionWeights,
    pub losses: TermLosses,
    pub direct_match: DirectMatchParams,
    pub scan_match: ScanMatchParams,
    pub feature_ransac: RansacParams,
    pub scan_ransac: RansacParams,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            mode: Mode::ScanFeature,
            kf_translation: 1.5,
            kf_rotation: 0.6,
            kf_time: 3.0,
            fallback_translation: 0.2,
            fallback_rotation: 0.1,
            max_window: 120,
            weights: FusionWeights::default(),
            losses: TermLosses::default(),
            direct_match: DirectMatchParams::default(),
            scan_match: ScanMatchParams::default(),
            feature_ransac: RansacParams::default(),
            scan_ransac: RansacParams {
                inlier_threshold: 0.10,
                ..RansacParams::default()
            },
        }
    }
}

impl TrackerConfig {
    pub fn with_mode(mode: Mode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("kf_translation", self.kf_translation),
            ("kf_rotation", self.kf_rotation),
            ("kf_time", self.kf_time),
            ("fallback_translation", self.fallback_translation),
            ("fallback_rotation", self.fallback_rotation),
            ("direct_match.radius", self.direct_match.radius),
            ("feature_ransac.inlier_threshold", self.feature_ransac.inlier_threshold),
            ("scan_ransac.inlier_threshold", self.scan_ransac.inlier_threshold),
            ("losses.feature", self.losses.feature.scale_c),
            ("losses.scan", self.losses.scan.scale_c),
        ];
        for (name, value) in positive {
            if !(value > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {value}")));
            }
        }
        if self.max_window == 0 {
            return Err(Error::InvalidParameter("max_window must be >= 1".into()));
        }
        self.scan_match.validate()?;
        self.effective_weights().validate()
    }

    /// Fusion weights with the term disabled by the mode set to zero.
    pub fn effective_weights(&self) -> FusionWeights {
        FusionWeights {
            w_feature: if self.mode.uses_features() { self.weights.w_feature } else { 0.0 },
            w_scan: if self.mode.uses_scans() { self.weights.w_scan } else { 0.0 },
        }
    }
}

/// One input frame plus what tracking recorded about it.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: usize,
    pub timestamp: f64,
    pub scan: VirtualScan,
    /// ROI-filtered features.
    pub features: FeatureFrame,
    pub odom: OdomSample,
    pub estimated_pose_in_keyframe: Pose2,
    /// Inlier correspondences against the keyframe, kept for BA.
    pub feature_matches: Vec<FeatureCorrespondence>,
    pub scan_matches: Vec<ScanCorrespondence>,
}

impl Frame {
    pub fn new(index: usize, scan: VirtualScan, features: FeatureFrame, odom: OdomSample) -> Self {
        Self {
            index,
            timestamp: odom.timestamp,
            scan,
            features,
            odom,
            estimated_pose_in_keyframe: Pose2::IDENTITY,
            feature_matches: Vec::new(),
            scan_matches: Vec::new(),
        }
    }

    /// Builds the virtual scan from `mask` and keeps the features on its
    /// cleaned free space. A mask whose center is not free yields an empty
    /// scan and ROI against the raw mask.
    pub fn from_mask(
        index: usize,
        mask: &FreeSpaceMask,
        features: &FeatureFrame,
        odom: OdomSample,
        lidar: &VirtualLidarParams,
    ) -> Result<Self> {
        let (scan, roi) = match make_scan(mask, lidar) {
            Ok((scan, cleaned)) => (scan, apply_roi(&features.features, &cleaned)),
            Err(Error::CenterNotFree { .. }) => (
                VirtualScan::empty(lidar.angle_increment),
                apply_roi(&features.features, mask),
            ),
            Err(e) => return Err(e),
        };
        let features = FeatureFrame {
            timestamp: odom.timestamp,
            features: roi,
        };
        Ok(Self::new(index, scan, features, odom))
    }

    fn clear_matches(&mut self) {
        self.feature_matches.clear();
        self.scan_matches.clear();
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Keyframe {
    pub frame: Frame,
    pub world_pose: Pose2,
    /// Optimizable copies of the keyframe feature positions.
    pub feature_points: Vec<Point2>,
}

/// Why a frame used the odometry delta instead of its VO estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FallbackReason {
    NoUsableTerm,
    SolverFailed,
    Deviation,
}

impl FallbackReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            FallbackReason::NoUsableTerm => "no_usable_term",
            FallbackReason::SolverFailed => "solver_failed",
            FallbackReason::Deviation => "deviation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameDiagnostics {
    pub feature_candidates: usize,
    pub feature_inliers: usize,
    pub scan_candidates: usize,
    pub scan_inliers: usize,
    pub initial_cost: Option<f64>,
    pub final_cost: Option<f64>,
    pub solver_iterations: usize,
    pub fallback: Option<FallbackReason>,
    /// Final BA cost when this frame closed a window.
    pub ba_cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerOutput {
    pub frame_index: usize,
    pub timestamp: f64,
    pub world_pose: Pose2,
    pub relative_pose: Pose2,
    pub status: FrameStatus,
    pub diagnostics: FrameDiagnostics,
}

/// Prior for the current frame: the previous frame's keyframe-relative
/// pose advanced by the odometry increment.
pub fn predict_motion(prev_frame: &Frame, current_odom: &OdomSample) -> Pose2 {
    let delta = prev_frame.odom.pose.relative(&current_odom.pose);
    prev_frame.estimated_pose_in_keyframe.compose(&delta)
}

pub fn should_create_keyframe(
    relative_pose: &Pose2,
    elapsed: f64,
    odom_delta: &Pose2,
    config: &TrackerConfig,
) -> bool {
    let exceeds = |p: &Pose2| {
        p.translation_norm() > config.kf_translation || p.theta.abs() > config.kf_rotation
    };
    exceeds(relative_pose) || elapsed > config.kf_time || exceeds(odom_delta)
}

/// Makes `frame` the keyframe at `previous_world ∘ relative`. Its features
/// become the new optimizable point set and its matches are dropped.
pub fn promote_keyframe(previous_world: &Pose2, mut frame: Frame, relative: &Pose2) -> Keyframe {
    frame.estimated_pose_in_keyframe = Pose2::IDENTITY;
    frame.clear_matches();
    let feature_points = frame.features.features.iter().map(|f| f.position).collect();
    Keyframe {
        world_pose: previous_world.compose(relative),
        frame,
        feature_points,
    }
}

struct Estimate {
    pose: Pose2,
    feature_matches: Vec<FeatureCorrespondence>,
    scan_matches: Vec<ScanCorrespondence>,
}

#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    keyframe: Option<Keyframe>,
    window: Vec<Frame>,
    last_ba: Option<BundleAdjustmentResult>,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            keyframe: None,
            window: Vec::new(),
            last_ba: None,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn keyframe(&self) -> Option<&Keyframe> {
        self.keyframe.as_ref()
    }

    /// Frames tracked against the current keyframe.
    pub fn window(&self) -> &[Frame] {
        &self.window
    }

    /// Result of the most recent bundle adjustment.
    pub fn last_bundle_adjustment(&self) -> Option<&BundleAdjustmentResult> {
        self.last_ba.as_ref()
    }

    /// Tracks one frame. Never fails: every failure degrades to the
    /// odometry delta.
    pub fn track(&mut self, mut frame: Frame) -> TrackerOutput {
        let Some(keyframe) = self.keyframe.as_ref() else {
            let out = TrackerOutput {
                frame_index: frame.index,
                timestamp: frame.timestamp,
                world_pose: Pose2::IDENTITY,
                relative_pose: Pose2::IDENTITY,
                status: FrameStatus::NewKeyframe,
                diagnostics: FrameDiagnostics::default(),
            };
            self.keyframe = Some(promote_keyframe(&Pose2::IDENTITY, frame, &Pose2::IDENTITY));
            return out;
        };

        let prev = self.window.last().unwrap_or(&keyframe.frame);
        let prior = predict_motion(prev, &frame.odom);
        let odom_delta = keyframe.frame.odom.pose.relative(&frame.odom.pose);
        let mut diagnostics = FrameDiagnostics::default();
        let estimate = self.estimate(keyframe, &frame, prior, &mut diagnostics);

        let mut fallback = None;
        match estimate {
            Ok(est) => {
                let dt = (est.pose.translation() - odom_delta.translation()).norm();
                let dr = wrap_angle(est.pose.theta - odom_delta.theta).abs();
                if dt > self.config.fallback_translation || dr > self.config.fallback_rotation {
                    fallback = Some(FallbackReason::Deviation);
                } else {
                    frame.estimated_pose_in_keyframe = est.pose;
                    frame.feature_matches = est.feature_matches;
                    frame.scan_matches = est.scan_matches;
                }
            }
            Err(reason) => fallback = Some(reason),
        }
        if fallback.is_some() {
            frame.estimated_pose_in_keyframe = odom_delta;
            frame.clear_matches();
        }
        diagnostics.fallback = fallback;

        let relative = frame.estimated_pose_in_keyframe;
        let elapsed = frame.timestamp - keyframe.frame.timestamp;
        let promote = should_create_keyframe(&relative, elapsed, &odom_delta, &self.config)
            || self.window.len() + 1 >= self.config.max_window;
        let status = if fallback.is_some() {
            FrameStatus::OdometryFallback
        } else if promote {
            FrameStatus::NewKeyframe
        } else {
            FrameStatus::Vo
        };
        let (frame_index, timestamp) = (frame.index, frame.timestamp);

        if !promote {
            let world_pose = keyframe.world_pose.compose(&relative);
            self.window.push(frame);
            return TrackerOutput {
                frame_index,
                timestamp,
                world_pose,
                relative_pose: relative,
                status,
                diagnostics,
            };
        }

        self.window.push(frame);
        let mut optimized = relative;
        match local_bundle_adjustment(
            &self.window,
            keyframe,
            &self.config.effective_weights(),
            &self.config.losses,
        ) {
            Ok(ba) => {
                optimized = *ba.poses.last().expect("window is non-empty");
                diagnostics.ba_cost = Some(ba.final_cost());
                self.last_ba = Some(ba);
            }
            Err(_) => self.last_ba = None,
        }
        let world = keyframe.world_pose;
        let candidate = self.window.pop().expect("window is non-empty");
        self.window.clear();
        let next = promote_keyframe(&world, candidate, &optimized);
        let world_pose = next.world_pose;
        self.keyframe = Some(next);
        TrackerOutput {
            frame_index,
            timestamp,
            world_pose,
            relative_pose: optimized,
            status,
            diagnostics,
        }
    }

    fn estimate(
        &self,
        keyframe: &Keyframe,
        frame: &Frame,
        prior: Pose2,
        diag: &mut FrameDiagnostics,
    ) -> std::result::Result<Estimate, FallbackReason> {
        let cfg = &self.config;
        let weights = cfg.effective_weights();

        let mut feature_matches = Vec::new();
        if weights.w_feature > 0.0 {
            if let Ok(candidates) = direct_match(&frame.features, &keyframe.frame.features, &prior, &cfg.direct_match) {
                diag.feature_candidates = candidates.len();
                let pairs: Vec<_> = candidates
                    .iter()
                    .map(|c| (c.current.position, c.keyframe.position))
                    .collect();
                if let Ok(ransac) = ransac_se2(&pairs, &cfg.feature_ransac) {
                    feature_matches = ransac.select(&candidates);
                }
            }
            diag.feature_inliers = feature_matches.len();
        }

        let mut scan_matches = Vec::new();
        if weights.w_scan > 0.0 {
            if let Ok(result) = match_scans(&frame.scan, &keyframe.frame.scan, prior, &cfg.scan_match) {
                diag.scan_candidates = result.correspondences.len();
                let pairs: Vec<_> = result
                    .correspondences
                    .iter()
                    .map(|c| (c.current_point, c.reference_point))
                    .collect();
                if let Ok(ransac) = ransac_se2(&pairs, &cfg.scan_ransac) {
                    scan_matches = ransac.select(&result.correspondences);
                }
            }
            diag.scan_inliers = scan_matches.len();
        }

        if feature_matches.is_empty() && scan_matches.is_empty() {
            return Err(FallbackReason::NoUsableTerm);
        }
        let est = estimate_relative_pose(&feature_matches, &scan_matches, prior, &weights, &cfg.losses)
            .map_err(|_| FallbackReason::SolverFailed)?;
        diag.initial_cost = Some(est.initial_cost);
        diag.final_cost = Some(est.final_cost);
        diag.solver_iterations = est.iterations;
        Ok(Estimate {
            pose: est.pose,
            feature_matches,
            scan_matches,
        })
    }
}

#[cfg(test)]
mod tests;
