//! Outlier rejection and the fused robust relative-pose solver.
//!
//! The solver minimizes
//! `sum_i w_f rho_f(|p̄_i - T p_i|^2) + sum_j w_s rho_s(|q̄_j - T q_j|^2)`
//! over a planar pose `T` with Cauchy kernels, using iteratively reweighted
//! Gauss-Newton steps under Levenberg damping.

use nalgebra::{Matrix3, SymmetricEigen, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::feature_matcher::FeatureCorrespondence;
use crate::geometry::{Point2, Pose2};
use crate::scan_matcher::ScanCorrespondence;

/// `rho(s) = c^2 ln(1 + s / c^2)` on squared residuals `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CauchyLoss {
    pub scale_c: f64,
}

impl Default for CauchyLoss {
    fn default() -> Self {
        Self { scale_c: 0.5 }
    }
}

impl CauchyLoss {
    pub fn new(scale_c: f64) -> Result<Self> {
        if !(scale_c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Cauchy scale must be positive, got {scale_c}"
            )));
        }
        Ok(Self { scale_c })
    }

    pub fn rho(&self, s: f64) -> f64 {
        cauchy_rho(s, self.scale_c)
    }

    /// `d rho / d s`, the IRLS weight.
    pub fn weight(&self, s: f64) -> f64 {
        let c2 = self.scale_c * self.scale_c;
        1.0 / (1.0 + s / c2)
    }
}

pub fn cauchy_rho(s: f64, scale_c: f64) -> f64 {
    let c2 = scale_c * scale_c;
    c2 * (s / c2).ln_1p()
}

/// Per-term weights `w_1` (features) and `w_2` (scan points).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionWeights {
    pub w_feature: f64,
    pub w_scan: f64,
}

impl Default for FusionWeights {
    fn default() -> Self {
        Self {
            w_feature: 1.0,
            w_scan: 0.1,
        }
    }
}

impl FusionWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.w_feature >= 0.0 && self.w_scan >= 0.0) {
            return Err(Error::InvalidParameter("fusion weights must be >= 0".into()));
        }
        if self.w_feature == 0.0 && self.w_scan == 0.0 {
            return Err(Error::InvalidParameter(
                "at least one fusion weight must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Robust kernels for the two residual families.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TermLosses {
    pub feature: CauchyLoss,
    pub scan: CauchyLoss,
}

impl TermLosses {
    pub fn uniform(loss: CauchyLoss) -> Self {
        Self {
            feature: loss,
            scan: loss,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacParams {
    /// Meters.
    pub inlier_threshold: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            inlier_threshold: 0.05,
            max_iterations: 200,
            seed: 0,
        }
    }
}

/// Minimum source-point separation for a usable two-point sample.
const MIN_SAMPLE_SEPARATION: f64 = 1e-9;

/// Rigid transform mapping `(s1, s2)` onto `(t1, t2)`: rotation from the
/// chord direction change, translation from the centroids.
pub fn fit_se2_minimal(pair1: (Point2, Point2), pair2: (Point2, Point2)) -> Result<Pose2> {
    let (s1, t1) = pair1;
    let (s2, t2) = pair2;
    let a = s2 - s1;
    let b = t2 - t1;
    if a.norm() < MIN_SAMPLE_SEPARATION {
        return Err(Error::DegenerateSample("coincident source points".into()));
    }
    let theta = (a.x * b.y - a.y * b.x).atan2(a.dot(&b));
    let (s, c) = theta.sin_cos();
    let cs = (s1.coords + s2.coords) * 0.5;
    let ct = (t1.coords + t2.coords) * 0.5;
    Ok(Pose2::new(
        ct.x - (c * cs.x - s * cs.y),
        ct.y - (s * cs.x + c * cs.y),
        theta,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacResult {
    pub inliers: Vec<bool>,
    pub pose: Pose2,
    pub inlier_count: usize,
}

impl RansacResult {
    pub fn select<T: Copy>(&self, items: &[T]) -> Vec<T> {
        items
            .iter()
            .zip(&self.inliers)
            .filter(|(_, &keep)| keep)
            .map(|(x, _)| *x)
            .collect()
    }
}

/// Seeded two-point RANSAC over `(source, target)` pairs. The best
/// hypothesis has the most inliers, then the lowest mean inlier residual,
/// then the earliest index.
pub fn ransac_se2(correspondences: &[(Point2, Point2)], params: &RansacParams) -> Result<RansacResult> {
    let n = correspondences.len();
    if n < 2 {
        return Err(Error::InsufficientCorrespondences {
            needed: 2,
            found: n,
        });
    }
    if !(params.inlier_threshold > 0.0) {
        return Err(Error::InvalidParameter("inlier threshold must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<(usize, f64, Pose2)> = None;
    for _ in 0..params.max_iterations {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let Ok(pose) = fit_se2_minimal(correspondences[i], correspondences[j]) else {
            continue;
        };
        let (count, sum) = correspondences
            .iter()
            .map(|(s, t)| (pose.transform_point(s) - t).norm())
            .filter(|&r| r <= params.inlier_threshold)
            .fold((0usize, 0.0), |(c, acc), r| (c + 1, acc + r));
        let mean = if count > 0 { sum / count as f64 } else { f64::INFINITY };
        let better = match best {
            None => true,
            Some((bc, bm, _)) => count > bc || (count == bc && mean < bm),
        };
        if better {
            best = Some((count, mean, pose));
        }
    }
    let (count, _, pose) = best.ok_or_else(|| {
        Error::DegenerateSample("every RANSAC sample was degenerate".into())
    })?;
    if count < 3 {
        return Err(Error::InsufficientCorrespondences {
            needed: 3,
            found: count,
        });
    }
    let inliers = correspondences
        .iter()
        .map(|(s, t)| (pose.transform_point(s) - t).norm() <= params.inlier_threshold)
        .collect();
    Ok(RansacResult {
        inliers,
        pose,
        inlier_count: count,
    })
}

/// A weighted `(source, target)` pair with its robust kernel. The residual
/// is `target - T source`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RobustPair {
    pub source: Point2,
    pub target: Point2,
    pub weight: f64,
    pub loss: CauchyLoss,
}

pub(crate) fn collect_pairs(
    features: &[FeatureCorrespondence],
    scans: &[ScanCorrespondence],
    weights: &FusionWeights,
    losses: &TermLosses,
) -> Vec<RobustPair> {
    let mut pairs = Vec::with_capacity(features.len() + scans.len());
    if weights.w_feature != 0.0 {
        pairs.extend(features.iter().map(|f| RobustPair {
            source: f.current.position,
            target: f.keyframe.position,
            weight: weights.w_feature,
            loss: losses.feature,
        }));
    }
    if weights.w_scan != 0.0 {
        pairs.extend(scans.iter().map(|s| RobustPair {
            source: s.current_point,
            target: s.reference_point,
            weight: weights.w_scan,
            loss: losses.scan,
        }));
    }
    pairs
}

/// Derivative of `T p` with respect to `(x, y, theta)`.
pub(crate) fn point_jacobian(pose: &Pose2, p: &Point2) -> (Vector2<f64>, Vector2<f64>) {
    let (s, c) = pose.theta.sin_cos();
    let rotated = Vector2::new(c * p.x - s * p.y, s * p.x + c * p.y);
    let dtheta = Vector2::new(-rotated.y, rotated.x);
    (rotated, dtheta)
}

pub(crate) fn pairs_cost(pairs: &[RobustPair], pose: &Pose2) -> f64 {
    pairs
        .iter()
        .map(|p| {
            let r = p.target - pose.transform_point(&p.source);
            p.weight * p.loss.rho(r.norm_squared())
        })
        .sum()
}

/// IRLS normal equations `H delta = b` with `H = sum w rho' J^T J` and
/// `b = sum w rho' J^T r`; the objective gradient is `-2 b`.
fn normal_equations(pairs: &[RobustPair], pose: &Pose2) -> (Matrix3<f64>, Vector3<f64>) {
    let mut h = Matrix3::zeros();
    let mut b = Vector3::zeros();
    for p in pairs {
        let (rotated, dtheta) = point_jacobian(pose, &p.source);
        let r = p.target.coords - Vector2::new(pose.x, pose.y) - rotated;
        let w = p.weight * p.loss.weight(r.norm_squared());
        let jx = Vector3::new(1.0, 0.0, dtheta.x);
        let jy = Vector3::new(0.0, 1.0, dtheta.y);
        h += (jx * jx.transpose() + jy * jy.transpose()) * w;
        b += (jx * r.x + jy * r.y) * w;
    }
    (h, b)
}

pub(crate) fn is_rank_deficient(h: &Matrix3<f64>) -> bool {
    let eig = SymmetricEigen::new(*h).eigenvalues;
    let max = eig.max();
    let min = eig.min();
    !(max > 0.0) || min <= 1e-10 * max
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub initial_damping: f64,
    pub max_iterations: usize,
    /// Stop once an accepted update is shorter than this.
    pub min_update: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            initial_damping: 1e-4,
            max_iterations: 100,
            min_update: 1e-9,
        }
    }
}

const MAX_DAMPING: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct PoseEstimate {
    pub pose: Pose2,
    pub initial_cost: f64,
    pub final_cost: f64,
    /// Cost after the start and after every accepted step.
    pub cost_trace: Vec<f64>,
    pub iterations: usize,
}

/// Value of the fused objective at `pose`.
pub fn objective(
    features: &[FeatureCorrespondence],
    scans: &[ScanCorrespondence],
    pose: &Pose2,
    weights: &FusionWeights,
    losses: &TermLosses,
) -> f64 {
    pairs_cost(&collect_pairs(features, scans, weights, losses), pose)
}

/// Analytic gradient of [`objective`] with respect to `(x, y, theta)`.
pub fn objective_gradient(
    features: &[FeatureCorrespondence],
    scans: &[ScanCorrespondence],
    pose: &Pose2,
    weights: &FusionWeights,
    losses: &TermLosses,
) -> Vector3<f64> {
    let (_, b) = normal_equations(&collect_pairs(features, scans, weights, losses), pose);
    -2.0 * b
}

/// Minimizes the fused robust objective starting from `initial`.
pub fn estimate_relative_pose(
    features: &[FeatureCorrespondence],
    scans: &[ScanCorrespondence],
    initial: Pose2,
    weights: &FusionWeights,
    losses: &TermLosses,
) -> Result<PoseEstimate> {
    estimate_relative_pose_with(features, scans, initial, weights, losses, &SolverSettings::default())
}

pub fn estimate_relative_pose_with(
    features: &[FeatureCorrespondence],
    scans: &[ScanCorrespondence],
    initial: Pose2,
    weights: &FusionWeights,
    losses: &TermLosses,
    settings: &SolverSettings,
) -> Result<PoseEstimate> {
    weights.validate()?;
    let pairs = collect_pairs(features, scans, weights, losses);
    if pairs.len() < 2 {
        return Err(Error::InsufficientCorrespondences {
            needed: 2,
            found: pairs.len(),
        });
    }
    solve_pairs(&pairs, initial, settings)
}

pub(crate) fn solve_pairs(
    pairs: &[RobustPair],
    initial: Pose2,
    settings: &SolverSettings,
) -> Result<PoseEstimate> {
    let mut pose = initial;
    let mut cost = pairs_cost(pairs, &pose);
    let initial_cost = cost;
    let mut trace = vec![cost];
    let mut lambda = settings.initial_damping;
    let mut iterations = 0;
    'outer: while iterations < settings.max_iterations {
        iterations += 1;
        let (h, b) = normal_equations(pairs, &pose);
        if is_rank_deficient(&h) {
            return Err(Error::RankDeficient);
        }
        loop {
            let damped = h + Matrix3::identity() * lambda;
            let Some(chol) = damped.cholesky() else {
                lambda *= 10.0;
                if lambda > MAX_DAMPING {
                    break 'outer;
                }
                continue;
            };
            let delta = chol.solve(&b);
            let candidate = Pose2::new(pose.x + delta.x, pose.y + delta.y, pose.theta + delta.z);
            let candidate_cost = pairs_cost(pairs, &candidate);
            if candidate_cost <= cost {
                pose = candidate;
                cost = candidate_cost;
                trace.push(cost);
                lambda = (lambda / 10.0).max(1e-12);
                if delta.norm() < settings.min_update {
                    break 'outer;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > MAX_DAMPING {
                break 'outer;
            }
        }
    }
    Ok(PoseEstimate {
        pose,
        initial_cost,
        final_cost: cost,
        cost_trace: trace,
        iterations,
    })
}
