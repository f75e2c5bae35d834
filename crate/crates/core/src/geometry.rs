//! Planar rigid-body algebra and the Ackermann motion model.
//!
//! Poses are stored as a raw `(x, y, theta)` triple. Every operation that
//! produces a heading wraps it back into `(-pi, pi]`.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};

/// Planar point in meters. In the vehicle frame `+x` points forward and
/// `+y` to the left, with the origin at the vehicle base center.
pub type Point2 = nalgebra::Point2<f64>;

/// Wraps an angle into `(-pi, pi]`. Angles already in range are returned
/// bit-for-bit unchanged.
pub fn wrap_angle(theta: f64) -> f64 {
    if theta > -PI && theta <= PI {
        return theta;
    }
    let wrapped = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if wrapped <= -PI {
        wrapped + 2.0 * PI
    } else {
        wrapped
    }
}

/// Planar rigid transform.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2 {
    pub const IDENTITY: Pose2 = Pose2 {
        x: 0.0,
        y: 0.0,
        theta: 0.0,
    };

    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn identity() -> Self {
        Self::IDENTITY
    }

    pub fn translation(&self) -> nalgebra::Vector2<f64> {
        nalgebra::Vector2::new(self.x, self.y)
    }

    pub fn translation_norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Pose2) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        Pose2::new(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )
    }

    pub fn inverse(&self) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        Pose2::new(
            -c * self.x - s * self.y,
            s * self.x - c * self.y,
            -self.theta,
        )
    }

    /// Rotates `p` by `theta`, then translates.
    pub fn transform_point(&self, p: &Point2) -> Point2 {
        let (s, c) = self.theta.sin_cos();
        Point2::new(self.x + c * p.x - s * p.y, self.y + s * p.x + c * p.y)
    }

    /// Pose of `other` expressed in the frame of `self`.
    pub fn relative(&self, other: &Pose2) -> Pose2 {
        self.inverse().compose(other)
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.theta]
    }
}

impl fmt::Display for Pose2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.6}, {:.6}, {:.6} rad)", self.x, self.y, self.theta)
    }
}

pub fn compose(a: &Pose2, b: &Pose2) -> Pose2 {
    a.compose(b)
}

pub fn inverse(a: &Pose2) -> Pose2 {
    a.inverse()
}

pub fn transform_point(t: &Pose2, p: &Point2) -> Point2 {
    t.transform_point(p)
}

pub fn relative(a: &Pose2, b: &Pose2) -> Pose2 {
    a.relative(b)
}

/// Below this `|tan(steering)|` the motion is integrated as a straight line.
const STRAIGHT_TAN_EPS: f64 = 1e-9;

/// Integrates constant speed and steering over `dt` along the exact arc of
/// radius `wheelbase / tan(steering)`.
pub fn ackermann_predict(
    start: &Pose2,
    speed: f64,
    steering: f64,
    wheelbase: f64,
    dt: f64,
) -> Result<Pose2> {
    if !(wheelbase > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "wheelbase must be positive, got {wheelbase}"
        )));
    }
    if !(dt >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "dt must be non-negative, got {dt}"
        )));
    }
    let arc = speed * dt;
    let tan_steer = steering.tan();
    let (s0, c0) = start.theta.sin_cos();
    if tan_steer.abs() < STRAIGHT_TAN_EPS {
        return Ok(Pose2::new(
            start.x + arc * c0,
            start.y + arc * s0,
            start.theta,
        ));
    }
    let radius = wheelbase / tan_steer;
    let dtheta = arc / radius;
    let (s1, c1) = (start.theta + dtheta).sin_cos();
    Ok(Pose2::new(
        start.x + radius * (s1 - s0),
        start.y + radius * (c0 - c1),
        start.theta + dtheta,
    ))
}

/// Timestamped pose from integrated wheel odometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdomSample {
    pub timestamp: f64,
    pub pose: Pose2,
}

impl OdomSample {
    pub fn new(timestamp: f64, pose: Pose2) -> Self {
        Self { timestamp, pose }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;
    use proptest::prelude::*;

    fn homogeneous(p: &Pose2) -> Matrix3<f64> {
        let (s, c) = p.theta.sin_cos();
        Matrix3::new(c, -s, p.x, s, c, p.y, 0.0, 0.0, 1.0)
    }

    fn from_homogeneous(m: &Matrix3<f64>) -> Pose2 {
        Pose2::new(m[(0, 2)], m[(1, 2)], m[(1, 0)].atan2(m[(0, 0)]))
    }

    fn assert_pose_eq(a: &Pose2, b: &Pose2, tol: f64) {
        assert!(
            (a.x - b.x).abs() <= tol
                && (a.y - b.y).abs() <= tol
                && wrap_angle(a.theta - b.theta).abs() <= tol,
            "{a} != {b}"
        );
    }

    #[test]
    fn compose_examples() {
        let t = Pose2::new(0.4, -2.0, 1.1);
        assert_eq!(Pose2::IDENTITY.compose(&t), t);

        let a = Pose2::new(1.0, 0.0, PI / 2.0);
        let b = Pose2::new(1.0, 0.0, 0.0);
        let oracle = from_homogeneous(&(homogeneous(&a) * homogeneous(&b)));
        assert_pose_eq(&oracle, &Pose2::new(1.0, 1.0, PI / 2.0), 1e-12);
        assert_pose_eq(&a.compose(&b), &oracle, 1e-12);

        assert_pose_eq(&t.compose(&t.inverse()), &Pose2::IDENTITY, 1e-12);
    }

    #[test]
    fn inverse_examples() {
        assert_pose_eq(&Pose2::IDENTITY.inverse(), &Pose2::IDENTITY, 0.0);
        assert_pose_eq(&Pose2::new(1.0, 0.0, 0.0).inverse(), &Pose2::new(-1.0, 0.0, 0.0), 0.0);

        let p = Pose2::new(1.0, 1.0, PI / 2.0);
        let oracle = from_homogeneous(&homogeneous(&p).try_inverse().unwrap());
        assert_pose_eq(&oracle, &Pose2::new(-1.0, 1.0, -PI / 2.0), 1e-12);
        assert_pose_eq(&p.inverse(), &oracle, 1e-12);
    }

    #[test]
    fn transform_point_examples() {
        let p = Point2::new(3.0, 4.0);
        assert_eq!(Pose2::IDENTITY.transform_point(&p), p);

        let q = Pose2::new(0.0, 0.0, PI / 2.0).transform_point(&Point2::new(1.0, 0.0));
        assert!((q - Point2::new(0.0, 1.0)).norm() < 1e-15);

        let t = Pose2::new(2.0, 1.0, PI);
        let h = homogeneous(&t) * nalgebra::Vector3::new(1.0, 1.0, 1.0);
        assert!((h.x - 1.0).abs() < 1e-12 && h.y.abs() < 1e-12);
        let r = t.transform_point(&Point2::new(1.0, 1.0));
        assert!((r.x - h.x).abs() < 1e-12 && (r.y - h.y).abs() < 1e-12);
    }

    #[test]
    fn relative_examples() {
        let t = Pose2::new(-0.3, 2.2, -2.9);
        assert_pose_eq(&t.relative(&t), &Pose2::IDENTITY, 1e-12);
        assert_pose_eq(&Pose2::IDENTITY.relative(&t), &t, 1e-12);

        let a = Pose2::new(1.0, 0.0, PI / 2.0);
        let b = Pose2::new(1.0, 1.0, PI / 2.0);
        let oracle = a.inverse().compose(&b);
        assert_pose_eq(&oracle, &Pose2::new(1.0, 0.0, 0.0), 1e-12);
        assert_pose_eq(&a.relative(&b), &oracle, 1e-12);
    }

    #[test]
    fn ackermann_examples() {
        let start = Pose2::new(1.0, 2.0, 0.3);
        assert_eq!(ackermann_predict(&start, 0.0, 0.2, 2.5, 4.0).unwrap(), start);

        let straight = ackermann_predict(&Pose2::IDENTITY, 1.0, 0.0, 2.5, 2.0).unwrap();
        assert_eq!(straight, Pose2::new(2.0, 0.0, 0.0));

        // radius 5 m, quarter circle
        let arc_len = 5.0 * PI / 2.0;
        let turned =
            ackermann_predict(&Pose2::IDENTITY, 1.0, (0.5f64).atan(), 2.5, arc_len).unwrap();
        assert_pose_eq(&turned, &Pose2::new(5.0, 5.0, PI / 2.0), 1e-12);
    }

    #[test]
    fn ackermann_rejects_bad_wheelbase() {
        assert!(ackermann_predict(&Pose2::IDENTITY, 1.0, 0.1, 0.0, 1.0).is_err());
        assert!(ackermann_predict(&Pose2::IDENTITY, 1.0, 0.1, -1.0, 1.0).is_err());
        assert!(ackermann_predict(&Pose2::IDENTITY, 1.0, 0.1, 2.0, -1.0).is_err());
    }

    #[test]
    fn wrap_angle_boundaries() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-3.5 * PI) - PI / 2.0).abs() < 1e-12);
    }

    fn pose() -> impl Strategy<Value = Pose2> {
        (-50.0..50.0f64, -50.0..50.0f64, -10.0..10.0f64).prop_map(|(x, y, t)| Pose2::new(x, y, t))
    }

    proptest! {
        #[test]
        fn group_laws(a in pose(), b in pose(), c in pose()) {
            assert_pose_eq(&a.compose(&b).compose(&c), &a.compose(&b.compose(&c)), 1e-12);
            assert_pose_eq(&a.compose(&Pose2::IDENTITY), &a, 1e-12);
            assert_pose_eq(&a.compose(&a.inverse()), &Pose2::IDENTITY, 1e-12);
            assert_pose_eq(&a.inverse().compose(&a), &Pose2::IDENTITY, 1e-12);
            assert_pose_eq(&a.compose(&a.relative(&b)), &b, 1e-12);
        }

        #[test]
        fn transform_is_compatible_with_compose(a in pose(), b in pose(), px in -20.0..20.0f64, py in -20.0..20.0f64) {
            let p = Point2::new(px, py);
            let lhs = a.compose(&b).transform_point(&p);
            let rhs = a.transform_point(&b.transform_point(&p));
            prop_assert!((lhs - rhs).norm() < 1e-12);
        }

        #[test]
        fn theta_stays_wrapped(a in pose(), b in pose(), raw in -100.0..100.0f64) {
            for t in [a.compose(&b).theta, a.inverse().theta, a.relative(&b).theta, Pose2::new(0.0, 0.0, raw).theta] {
                prop_assert!(t > -PI && t <= PI);
            }
        }

        #[test]
        fn ackermann_substeps_agree(start in pose(), speed in -2.0..2.0f64, steer in -0.6..0.6f64, dt in 0.0..5.0f64, n in 1usize..20) {
            let once = ackermann_predict(&start, speed, steer, 2.7, dt).unwrap();
            let mut stepped = start;
            for _ in 0..n {
                stepped = ackermann_predict(&stepped, speed, steer, 2.7, dt / n as f64).unwrap();
            }
            assert_pose_eq(&once, &stepped, 1e-9);
        }
    }
}
