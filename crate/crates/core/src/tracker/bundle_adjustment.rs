//! Joint refinement of window-frame poses and keyframe feature points.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Matrix2x3, Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{Point2, Pose2};
use crate::robust_estimation::{point_jacobian, CauchyLoss, FusionWeights, SolverSettings, TermLosses};

use super::{Frame, Keyframe};

#[derive(Debug, Clone, PartialEq)]
pub struct BundleAdjustmentResult {
    /// One pose per window frame, relative to the keyframe.
    pub poses: Vec<Pose2>,
    /// Keyframe feature points, index-aligned with the keyframe features.
    pub feature_points: Vec<Point2>,
    /// Cost at the start and after every accepted step.
    pub cost_trace: Vec<f64>,
    pub iterations: usize,
}

impl BundleAdjustmentResult {
    pub fn final_cost(&self) -> f64 {
        *self.cost_trace.last().expect("trace starts with the initial cost")
    }
}

enum Term {
    /// Window frame sees keyframe point: `l - T p`.
    Observation { pose: usize, point: usize, local: Point2 },
    /// The keyframe's own sighting of a point: `l - p_kf`.
    Anchor { point: usize, observed: Point2 },
    /// Scan pair: `q_ref - T q`.
    Scan { pose: usize, local: Point2, target: Point2 },
}

struct Problem {
    terms: Vec<(Term, f64, CauchyLoss)>,
    /// Window index of each optimized pose.
    pose_frames: Vec<usize>,
    /// Keyframe feature index of each optimized point.
    point_features: Vec<usize>,
}

struct State {
    poses: Vec<Pose2>,
    points: Vec<Point2>,
}

impl Problem {
    fn residual(&self, term: &Term, state: &State) -> Vector2<f64> {
        match *term {
            Term::Observation { pose, point, local } => {
                state.points[point] - state.poses[pose].transform_point(&local)
            }
            Term::Anchor { point, observed } => state.points[point] - observed,
            Term::Scan { pose, local, target } => target - state.poses[pose].transform_point(&local),
        }
    }

    fn cost(&self, state: &State) -> f64 {
        self.terms
            .iter()
            .map(|(t, w, loss)| w * loss.rho(self.residual(t, state).norm_squared()))
            .sum()
    }
}

/// Minimizes the windowed robust objective over every window frame pose
/// that carries residuals and every keyframe point seen by some window
/// frame. The keyframe's own observations anchor the points and fix the
/// gauge; frames without residuals and unobserved points stay frozen.
pub fn local_bundle_adjustment(
    window: &[Frame],
    keyframe: &Keyframe,
    weights: &FusionWeights,
    losses: &TermLosses,
) -> Result<BundleAdjustmentResult> {
    local_bundle_adjustment_with(window, keyframe, weights, losses, &SolverSettings::default())
}

pub fn local_bundle_adjustment_with(
    window: &[Frame],
    keyframe: &Keyframe,
    weights: &FusionWeights,
    losses: &TermLosses,
    settings: &SolverSettings,
) -> Result<BundleAdjustmentResult> {
    if window.is_empty() {
        return Err(Error::InvalidParameter("bundle adjustment needs a non-empty window".into()));
    }
    weights.validate()?;
    let kf_features = &keyframe.frame.features.features;
    if keyframe.feature_points.len() != kf_features.len() {
        return Err(Error::InvalidParameter(
            "keyframe feature points out of sync with its features".into(),
        ));
    }

    let mut pose_slot: BTreeMap<usize, usize> = BTreeMap::new();
    let mut point_slot: BTreeMap<usize, usize> = BTreeMap::new();
    let mut terms = Vec::new();
    for (fi, frame) in window.iter().enumerate() {
        let uses_features = weights.w_feature != 0.0 && !frame.feature_matches.is_empty();
        let uses_scan = weights.w_scan != 0.0 && !frame.scan_matches.is_empty();
        if !uses_features && !uses_scan {
            continue;
        }
        let next = pose_slot.len();
        let pose = *pose_slot.entry(fi).or_insert(next);
        if uses_features {
            for m in &frame.feature_matches {
                if m.keyframe_index >= kf_features.len() {
                    return Err(Error::InvalidParameter("feature match points past the keyframe".into()));
                }
                let next = point_slot.len();
                let point = *point_slot.entry(m.keyframe_index).or_insert(next);
                terms.push((
                    Term::Observation {
                        pose,
                        point,
                        local: m.current.position,
                    },
                    weights.w_feature,
                    losses.feature,
                ));
            }
        }
        if uses_scan {
            for s in &frame.scan_matches {
                terms.push((
                    Term::Scan {
                        pose,
                        local: s.current_point,
                        target: s.reference_point,
                    },
                    weights.w_scan,
                    losses.scan,
                ));
            }
        }
    }
    let mut point_features = vec![0; point_slot.len()];
    for (&feature, &slot) in &point_slot {
        point_features[slot] = feature;
        terms.push((
            Term::Anchor {
                point: slot,
                observed: kf_features[feature].position,
            },
            weights.w_feature,
            losses.feature,
        ));
    }
    let mut pose_frames = vec![0; pose_slot.len()];
    for (&frame, &slot) in &pose_slot {
        pose_frames[slot] = frame;
    }
    let problem = Problem {
        terms,
        pose_frames,
        point_features,
    };

    let mut state = State {
        poses: problem
            .pose_frames
            .iter()
            .map(|&f| window[f].estimated_pose_in_keyframe)
            .collect(),
        points: problem
            .point_features
            .iter()
            .map(|&k| keyframe.feature_points[k])
            .collect(),
    };
    let (trace, iterations) = if problem.terms.is_empty() {
        (vec![0.0], 0)
    } else {
        optimize(&problem, &mut state, settings)?
    };

    let mut poses: Vec<Pose2> = window.iter().map(|f| f.estimated_pose_in_keyframe).collect();
    for (slot, &f) in problem.pose_frames.iter().enumerate() {
        poses[f] = state.poses[slot];
    }
    let mut feature_points = keyframe.feature_points.clone();
    for (slot, &k) in problem.point_features.iter().enumerate() {
        feature_points[k] = state.points[slot];
    }
    Ok(BundleAdjustmentResult {
        poses,
        feature_points,
        cost_trace: trace,
        iterations,
    })
}

const MAX_DAMPING: f64 = 1e12;

struct Normal {
    pose_blocks: Vec<Matrix3<f64>>,
    pose_rhs: Vec<Vector3<f64>>,
    /// Point blocks are `s I`; only the scalar is stored.
    point_diag: Vec<f64>,
    point_rhs: Vec<Vector2<f64>>,
    /// Per point: `(pose, H_point_pose)` couplings.
    couplings: Vec<Vec<(usize, Matrix2x3<f64>)>>,
}

fn build_normal(problem: &Problem, state: &State) -> Normal {
    let (np, nl) = (state.poses.len(), state.points.len());
    let mut n = Normal {
        pose_blocks: vec![Matrix3::zeros(); np],
        pose_rhs: vec![Vector3::zeros(); np],
        point_diag: vec![0.0; nl],
        point_rhs: vec![Vector2::zeros(); nl],
        couplings: vec![Vec::new(); nl],
    };
    for (term, w, loss) in &problem.terms {
        let r = problem.residual(term, state);
        let omega = w * loss.weight(r.norm_squared());
        // d r / d pose = -J with J = [I | d(Rp)/dtheta]
        let pose_jac = |pose: usize, local: &Point2| {
            let (_, dtheta) = point_jacobian(&state.poses[pose], local);
            Matrix2x3::new(-1.0, 0.0, -dtheta.x, 0.0, -1.0, -dtheta.y)
        };
        match term {
            Term::Observation { pose, point, local } => {
                let jp = pose_jac(*pose, local);
                n.pose_blocks[*pose] += jp.transpose() * jp * omega;
                n.pose_rhs[*pose] -= jp.transpose() * r * omega;
                n.point_diag[*point] += omega;
                n.point_rhs[*point] -= r * omega;
                // H_point_pose = I^T jp
                let block = jp * omega;
                match n.couplings[*point].iter_mut().find(|(p, _)| p == pose) {
                    Some((_, b)) => *b += block,
                    None => n.couplings[*point].push((*pose, block)),
                }
            }
            Term::Anchor { point, .. } => {
                n.point_diag[*point] += omega;
                n.point_rhs[*point] -= r * omega;
            }
            Term::Scan { pose, local, .. } => {
                let jp = pose_jac(*pose, local);
                n.pose_blocks[*pose] += jp.transpose() * jp * omega;
                n.pose_rhs[*pose] -= jp.transpose() * r * omega;
            }
        }
    }
    n
}

type Step = (Vec<Vector3<f64>>, Vec<Vector2<f64>>);

/// Solves the damped system by eliminating the point blocks.
fn solve_damped(n: &Normal, lambda: f64) -> Option<Step> {
    let np = n.pose_blocks.len();
    let mut s = DMatrix::<f64>::zeros(3 * np, 3 * np);
    let mut rhs = DVector::<f64>::zeros(3 * np);
    for (i, (block, b)) in n.pose_blocks.iter().zip(&n.pose_rhs).enumerate() {
        s.fixed_view_mut::<3, 3>(3 * i, 3 * i)
            .copy_from(&(block + Matrix3::identity() * lambda));
        rhs.fixed_rows_mut::<3>(3 * i).copy_from(b);
    }
    for (l, links) in n.couplings.iter().enumerate() {
        let inv = 1.0 / (n.point_diag[l] + lambda);
        for (pi, bi) in links {
            // H_pose_point A^-1 H_point_pose
            let left = bi.transpose() * inv;
            let mut rows = rhs.fixed_rows_mut::<3>(3 * pi);
            rows -= left * n.point_rhs[l];
            for (pj, bj) in links {
                let mut view = s.fixed_view_mut::<3, 3>(3 * pi, 3 * pj);
                view -= left * bj;
            }
        }
    }
    let delta_p = if np > 0 {
        s.cholesky()?.solve(&rhs)
    } else {
        DVector::zeros(0)
    };
    let pose_steps: Vec<Vector3<f64>> = (0..np)
        .map(|i| Vector3::new(delta_p[3 * i], delta_p[3 * i + 1], delta_p[3 * i + 2]))
        .collect();
    let point_steps = n
        .couplings
        .iter()
        .enumerate()
        .map(|(l, links)| {
            let mut b = n.point_rhs[l];
            for (pi, bi) in links {
                b -= bi * pose_steps[*pi];
            }
            b / (n.point_diag[l] + lambda)
        })
        .collect();
    Some((pose_steps, point_steps))
}

fn optimize(problem: &Problem, state: &mut State, settings: &SolverSettings) -> Result<(Vec<f64>, usize)> {
    let mut cost = problem.cost(state);
    let mut trace = vec![cost];
    let mut lambda = settings.initial_damping;
    let mut iterations = 0;
    'outer: while iterations < settings.max_iterations {
        iterations += 1;
        let normal = build_normal(problem, state);
        loop {
            let Some((dp, dl)) = solve_damped(&normal, lambda) else {
                lambda *= 10.0;
                if lambda > MAX_DAMPING {
                    break 'outer;
                }
                continue;
            };
            let candidate = State {
                poses: state
                    .poses
                    .iter()
                    .zip(&dp)
                    .map(|(p, d)| Pose2::new(p.x + d.x, p.y + d.y, p.theta + d.z))
                    .collect(),
                points: state.points.iter().zip(&dl).map(|(p, d)| p + d).collect(),
            };
            let candidate_cost = problem.cost(&candidate);
            if candidate_cost <= cost {
                let step = (dp.iter().map(|d| d.norm_squared()).sum::<f64>()
                    + dl.iter().map(|d| d.norm_squared()).sum::<f64>())
                .sqrt();
                *state = candidate;
                cost = candidate_cost;
                trace.push(cost);
                lambda = (lambda / 10.0).max(1e-12);
                if step < settings.min_update {
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
    Ok((trace, iterations))
}
