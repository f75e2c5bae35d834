//! Point-to-line ICP between two virtual scans.
//!
//! Each iteration pairs every transformed current point with the line
//! through its two nearest reference points, gates and trims the pairs, and
//! takes one Gauss-Newton step on the perpendicular distances.

use nalgebra::{Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{Point2, Pose2};
use crate::virtual_lidar::VirtualScan;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanMatchParams {
    pub max_iterations: usize,
    /// Threshold on the norm of the `(dx, dy, dtheta)` update.
    pub convergence_eps: f64,
    /// Meters; pairs whose nearest reference point is farther are dropped.
    pub max_correspondence_dist: f64,
    /// Fraction of the worst pairs dropped every iteration.
    pub trim_fraction: f64,
}

impl Default for ScanMatchParams {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            convergence_eps: 1e-6,
            max_correspondence_dist: 1.0,
            trim_fraction: 0.1,
        }
    }
}

impl ScanMatchParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.trim_fraction) {
            return Err(Error::InvalidParameter(format!(
                "trim_fraction must be in [0, 1), got {}",
                self.trim_fraction
            )));
        }
        if !(self.max_correspondence_dist > 0.0) {
            return Err(Error::InvalidParameter(
                "max_correspondence_dist must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A current-frame scan point and its projection foot on the matched
/// reference line, in the reference frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanCorrespondence {
    pub current_point: Point2,
    pub reference_point: Point2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanMatchResult {
    /// Reference-from-current transform.
    pub pose: Pose2,
    pub correspondences: Vec<ScanCorrespondence>,
    pub converged: bool,
    pub mean_residual: f64,
    pub iterations: usize,
}

const DEGENERATE_SEGMENT: f64 = 1e-12;

/// Perpendicular distance from `p` to the line through `a` and `b`, and the
/// projection foot. Falls back to the distance to `a` when `a == b`.
pub fn point_to_line_residual(p: &Point2, a: &Point2, b: &Point2) -> (f64, Point2) {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2.sqrt() < DEGENERATE_SEGMENT {
        return ((p - a).norm(), *a);
    }
    let t = (p - a).dot(&ab) / len2;
    let foot = a + ab * t;
    ((p - foot).norm(), foot)
}

/// One gated pair with its Gauss-Newton rows.
#[derive(Debug, Clone, Copy)]
struct Pairing {
    index: usize,
    distance: f64,
    foot: Point2,
    /// Unit normal of the reference line, `None` for the point-to-point case.
    normal: Option<Vector2<f64>>,
}

fn two_nearest(p: &Point2, reference: &[Point2]) -> Option<(usize, usize, f64)> {
    let mut best = (usize::MAX, f64::INFINITY);
    let mut second = (usize::MAX, f64::INFINITY);
    for (i, r) in reference.iter().enumerate() {
        let d = (r - p).norm_squared();
        if d < best.1 {
            second = best;
            best = (i, d);
        } else if d < second.1 {
            second = (i, d);
        }
    }
    if best.0 == usize::MAX {
        return None;
    }
    let second_idx = if second.0 == usize::MAX { best.0 } else { second.0 };
    Some((best.0, second_idx, best.1.sqrt()))
}

fn pair_points(
    current: &[Point2],
    reference: &[Point2],
    pose: &Pose2,
    params: &ScanMatchParams,
) -> Vec<Pairing> {
    let mut pairs: Vec<Pairing> = current
        .iter()
        .enumerate()
        .filter_map(|(index, q)| {
            let p = pose.transform_point(q);
            let (i1, i2, nearest) = two_nearest(&p, reference)?;
            if nearest > params.max_correspondence_dist {
                return None;
            }
            let (a, b) = (reference[i1], reference[i2]);
            let (distance, foot) = point_to_line_residual(&p, &a, &b);
            let ab = b - a;
            let normal = (ab.norm() >= DEGENERATE_SEGMENT)
                .then(|| Vector2::new(-ab.y, ab.x).normalize());
            Some(Pairing {
                index,
                distance,
                foot,
                normal,
            })
        })
        .collect();
    pairs.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.index.cmp(&b.index)));
    let drop = (pairs.len() as f64 * params.trim_fraction).floor() as usize;
    pairs.truncate(pairs.len() - drop);
    pairs
}

#[cfg(test)]
/// Point-to-line cost `sum d^2` of fixed pairings at `pose`.
fn pairing_cost(current: &[Point2], pairs: &[Pairing], pose: &Pose2) -> f64 {
    pairs
        .iter()
        .map(|pr| {
            let e = pose.transform_point(&current[pr.index]) - pr.foot;
            match pr.normal {
                Some(n) => n.dot(&e).powi(2),
                None => e.norm_squared(),
            }
        })
        .sum()
}

/// Gauss-Newton step for fixed pairings.
fn solve_step(current: &[Point2], pairs: &[Pairing], pose: &Pose2) -> Result<Vector3<f64>> {
    let (s, c) = pose.theta.sin_cos();
    let mut h = Matrix3::zeros();
    let mut g = Vector3::zeros();
    let mut add_row = |j: Vector3<f64>, r: f64| {
        h += j * j.transpose();
        g += j * r;
    };
    for pr in pairs {
        let q = current[pr.index];
        let rq = Vector2::new(c * q.x - s * q.y, s * q.x + c * q.y);
        let p = Point2::new(pose.x + rq.x, pose.y + rq.y);
        let e = p - pr.foot;
        let dtheta = Vector2::new(-rq.y, rq.x);
        match pr.normal {
            Some(n) => add_row(Vector3::new(n.x, n.y, n.dot(&dtheta)), n.dot(&e)),
            None => {
                add_row(Vector3::new(1.0, 0.0, dtheta.x), e.x);
                add_row(Vector3::new(0.0, 1.0, dtheta.y), e.y);
            }
        }
    }
    let chol = h
        .cholesky()
        .ok_or_else(|| Error::DegenerateGeometry("scan match normal equations singular".into()))?;
    Ok(-chol.solve(&g))
}

/// Estimates the reference-from-current pose between two scans.
pub fn match_scans(
    current: &VirtualScan,
    reference: &VirtualScan,
    initial_guess: Pose2,
    params: &ScanMatchParams,
) -> Result<ScanMatchResult> {
    params.validate()?;
    if current.is_empty() || reference.is_empty() {
        return Err(Error::InsufficientCorrespondences {
            needed: 3,
            found: 0,
        });
    }
    let cur = current.positions();
    let refs = reference.positions();

    let mut pose = initial_guess;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < params.max_iterations {
        iterations += 1;
        let pairs = pair_points(&cur, &refs, &pose, params);
        if pairs.len() < 3 {
            return Err(Error::InsufficientCorrespondences {
                needed: 3,
                found: pairs.len(),
            });
        }
        let step = solve_step(&cur, &pairs, &pose)?;
        pose = Pose2::new(pose.x + step.x, pose.y + step.y, pose.theta + step.z);
        if step.norm() < params.convergence_eps {
            converged = true;
            break;
        }
    }

    let pairs = pair_points(&cur, &refs, &pose, params);
    if pairs.len() < 3 {
        return Err(Error::InsufficientCorrespondences {
            needed: 3,
            found: pairs.len(),
        });
    }
    let mean_residual = pairs.iter().map(|p| p.distance).sum::<f64>() / pairs.len() as f64;
    let mut correspondences: Vec<_> = pairs
        .iter()
        .map(|p| (p.index, ScanCorrespondence {
            current_point: cur[p.index],
            reference_point: p.foot,
        }))
        .collect();
    correspondences.sort_by_key(|(i, _)| *i);
    Ok(ScanMatchResult {
        pose,
        correspondences: correspondences.into_iter().map(|(_, c)| c).collect(),
        converged,
        mean_residual,
        iterations,
    })
}
