//! Trajectory alignment and segment-wise relative error.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Point2, Pose2};

/// Number of leading poses used for alignment unless told otherwise.
pub const DEFAULT_ALIGN_POSES: usize = 100;

/// Segment lengths in meters used when none are given.
pub const DEFAULT_SEGMENT_LENGTHS: [f64; 4] = [4.0, 8.0, 16.0, 32.0];

/// Timestamped poses with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    samples: Vec<(f64, Pose2)>,
}

impl Trajectory {
    pub fn new(samples: Vec<(f64, Pose2)>) -> Result<Self> {
        if samples.iter().any(|(t, _)| !t.is_finite()) {
            return Err(Error::InvalidParameter("trajectory timestamps must be finite".into()));
        }
        if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::InvalidParameter(
                "trajectory timestamps must be strictly increasing".into(),
            ));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[(f64, Pose2)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn poses(&self) -> impl Iterator<Item = &Pose2> {
        self.samples.iter().map(|(_, p)| p)
    }

    /// Total arc length of the position polyline.
    pub fn path_length(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| (w[1].1.translation() - w[0].1.translation()).norm())
            .sum()
    }

    /// Applies `p -> transform * p` with positions also scaled about the
    /// origin first.
    pub fn transformed(&self, alignment: &Alignment) -> Self {
        Self {
            samples: self
                .samples
                .iter()
                .map(|(t, p)| (*t, alignment.apply(p)))
                .collect(),
        }
    }

    fn frame_period(&self) -> f64 {
        let mut gaps: Vec<f64> = self.samples.windows(2).map(|w| w[1].0 - w[0].0).collect();
        if gaps.is_empty() {
            return f64::INFINITY;
        }
        gaps.sort_by(f64::total_cmp);
        gaps[gaps.len() / 2]
    }
}

/// Pairs each reference sample with the estimate sample nearest in time,
/// keeping pairs closer than half the reference frame period.
/// Returns `(estimate pose, reference pose)` in reference order.
pub fn associate(estimate: &Trajectory, reference: &Trajectory) -> Vec<(Pose2, Pose2)> {
    let tolerance = 0.5 * reference.frame_period();
    let est = estimate.samples();
    let mut out = Vec::with_capacity(reference.len());
    for &(t, ref_pose) in reference.samples() {
        let i = est.partition_point(|(s, _)| *s < t);
        let nearest = [i.checked_sub(1), (i < est.len()).then_some(i)]
            .into_iter()
            .flatten()
            .min_by(|&a, &b| (est[a].0 - t).abs().total_cmp(&(est[b].0 - t).abs()));
        if let Some(k) = nearest {
            if (est[k].0 - t).abs() < tolerance {
                out.push((est[k].1, ref_pose));
            }
        }
    }
    out
}

/// Similarity transform `p -> scale * R(rotation) * p + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alignment {
    pub rotation: f64,
    pub translation: nalgebra::Vector2<f64>,
    pub scale: f64,
}

impl Alignment {
    pub const IDENTITY: Alignment = Alignment {
        rotation: 0.0,
        translation: nalgebra::Vector2::new(0.0, 0.0),
        scale: 1.0,
    };

    pub fn apply(&self, pose: &Pose2) -> Pose2 {
        let (s, c) = self.rotation.sin_cos();
        let (x, y) = (self.scale * pose.x, self.scale * pose.y);
        Pose2::new(
            c * x - s * y + self.translation.x,
            s * x + c * y + self.translation.y,
            pose.theta + self.rotation,
        )
    }

    pub fn as_pose(&self) -> Pose2 {
        Pose2::new(self.translation.x, self.translation.y, self.rotation)
    }
}

/// Closed-form least-squares fit of `reference ~ A(estimate)` over point
/// pairs.
pub fn fit_alignment(pairs: &[(Point2, Point2)], with_scale: bool) -> Result<Alignment> {
    if pairs.len() < 2 {
        return Err(Error::InsufficientCorrespondences {
            needed: 2,
            found: pairs.len(),
        });
    }
    let n = pairs.len() as f64;
    let est_mean = pairs.iter().map(|(e, _)| e.coords).sum::<nalgebra::Vector2<f64>>() / n;
    let ref_mean = pairs.iter().map(|(_, r)| r.coords).sum::<nalgebra::Vector2<f64>>() / n;
    let (mut dot, mut cross, mut var) = (0.0, 0.0, 0.0);
    for (e, r) in pairs {
        let a = e.coords - est_mean;
        let b = r.coords - ref_mean;
        dot += a.dot(&b);
        cross += a.x * b.y - a.y * b.x;
        var += a.norm_squared();
    }
    let rotation = cross.atan2(dot);
    let scale = if with_scale {
        if var <= f64::EPSILON * n {
            return Err(Error::DegenerateGeometry(
                "scale alignment needs spread-out estimate positions".into(),
            ));
        }
        (dot * rotation.cos() + cross * rotation.sin()) / var
    } else {
        1.0
    };
    let (s, c) = rotation.sin_cos();
    let rotated = nalgebra::Vector2::new(c * est_mean.x - s * est_mean.y, s * est_mean.x + c * est_mean.y);
    Ok(Alignment {
        rotation,
        translation: ref_mean - rotated * scale,
        scale,
    })
}

/// Fits an alignment over the first `n_poses` associated positions and
/// applies it to the whole estimate. When fewer pairs exist all of them
/// are used.
pub fn align_trajectories(
    estimate: &Trajectory,
    reference: &Trajectory,
    n_poses: usize,
    with_scale: bool,
) -> Result<(Trajectory, Alignment)> {
    let pairs: Vec<(Point2, Point2)> = associate(estimate, reference)
        .into_iter()
        .take(n_poses)
        .map(|(e, r)| (Point2::new(e.x, e.y), Point2::new(r.x, r.y)))
        .collect();
    let alignment = fit_alignment(&pairs, with_scale)?;
    Ok((estimate.transformed(&alignment), alignment))
}

/// Five-number summary plus mean. Quartiles interpolate linearly between
/// order statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

impl Summary {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |f: f64| {
            let pos = f * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Some(Self {
            min: v[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: v[v.len() - 1],
            mean: v.iter().sum::<f64>() / v.len() as f64,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentErrors {
    pub length: f64,
    /// Raw per-segment values, in start order.
    pub translation_pct: Vec<f64>,
    pub rotation_deg: Vec<f64>,
}

impl SegmentErrors {
    pub fn translation_summary(&self) -> Option<Summary> {
        Summary::from_values(&self.translation_pct)
    }

    pub fn rotation_summary(&self) -> Option<Summary> {
        Summary::from_values(&self.rotation_deg)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RelativeErrorReport {
    pub segments: Vec<SegmentErrors>,
}

pub const REPORT_HEADER: &str = "segment_length_m,metric,min,q1,median,q3,max,mean";

impl RelativeErrorReport {
    pub fn segment(&self, length: f64) -> Option<&SegmentErrors> {
        self.segments.iter().find(|s| s.length == length)
    }

    /// CSV text; lengths without any segment get empty statistic fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for seg in &self.segments {
            for (metric, summary) in [
                ("translation_pct", seg.translation_summary()),
                ("rotation_deg", seg.rotation_summary()),
            ] {
                let _ = write!(out, "{},{metric}", seg.length);
                match summary {
                    Some(s) => {
                        let _ = write!(out, ",{},{},{},{},{},{}", s.min, s.q1, s.median, s.q3, s.max, s.mean);
                    }
                    None => out.push_str(",,,,,,"),
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// `{4, 8, 16, 32}` m, shrunk proportionally when the path is shorter than
/// 40 m so the longest segment still fits.
pub fn default_segment_lengths(path_length: f64) -> Vec<f64> {
    let factor = (path_length / 40.0).min(1.0);
    DEFAULT_SEGMENT_LENGTHS.iter().map(|l| l * factor).collect()
}

/// Dense relative error: every associated pose starts one segment per
/// length. The segment ends at the first reference pose whose travelled
/// distance reaches the length.
pub fn relative_error(
    estimate: &Trajectory,
    reference: &Trajectory,
    segment_lengths: &[f64],
) -> Result<RelativeErrorReport> {
    if let Some(l) = segment_lengths.iter().find(|l| !(**l > 0.0) || !l.is_finite()) {
        return Err(Error::InvalidParameter(format!("segment length {l} must be positive")));
    }
    let pairs = associate(estimate, reference);
    let mut distance = Vec::with_capacity(pairs.len());
    let mut total = 0.0;
    for (k, (_, r)) in pairs.iter().enumerate() {
        if k > 0 {
            total += (r.translation() - pairs[k - 1].1.translation()).norm();
        }
        distance.push(total);
    }
    let segments = segment_lengths
        .iter()
        .map(|&length| {
            let mut seg = SegmentErrors {
                length,
                translation_pct: Vec::new(),
                rotation_deg: Vec::new(),
            };
            for i in 0..pairs.len() {
                let j = distance.partition_point(|d| *d < distance[i] + length);
                if j >= pairs.len() {
                    break;
                }
                let est = pairs[i].0.relative(&pairs[j].0);
                let truth = pairs[i].1.relative(&pairs[j].1);
                seg.translation_pct
                    .push((est.translation() - truth.translation()).norm() / length * 100.0);
                seg.rotation_deg
                    .push(wrap_angle(est.theta - truth.theta).abs().to_degrees());
            }
            seg
        })
        .collect();
    Ok(RelativeErrorReport { segments })
}

/// Final-pose difference after rigid alignment over the leading
/// `n_poses` poses: `(meters, degrees)`.
pub fn absolute_endpoint_error_with(
    estimate: &Trajectory,
    reference: &Trajectory,
    n_poses: usize,
) -> Result<(f64, f64)> {
    if estimate.is_empty() || reference.is_empty() {
        return Err(Error::InvalidParameter("endpoint error needs non-empty trajectories".into()));
    }
    let (aligned, _) = align_trajectories(estimate, reference, n_poses, false)?;
    let (est, truth) = *associate(&aligned, reference)
        .last()
        .ok_or_else(|| Error::InvalidParameter("no associated poses".into()))?;
    Ok((
        (est.translation() - truth.translation()).norm(),
        wrap_angle(est.theta - truth.theta).abs().to_degrees(),
    ))
}

pub fn absolute_endpoint_error(estimate: &Trajectory, reference: &Trajectory) -> Result<(f64, f64)> {
    absolute_endpoint_error_with(estimate, reference, DEFAULT_ALIGN_POSES)
}
