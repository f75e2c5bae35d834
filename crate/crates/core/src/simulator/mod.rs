//! Deterministic synthetic parking world: convex obstacles, ground
//! landmarks, Ackermann trajectories, and per-frame sensor rendering.

mod scenarios;
mod world;

use std::f64::consts::PI;

use nalgebra::Vector2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub use scenarios::{
    complementarity_world, complementarity_world_with, parking_loop, parking_loop_with, parking_loop_world,
    parking_loop_world_with, Scenario, ScenarioSpec, DEFAULT_WHEELBASE, LANDMARK_DENSITY,
};
pub use world::{Bounds, ConvexPolygon, Landmark, World};

use crate::error::{Error, Result};
use crate::feature_matcher::{Feature, FeatureFrame};
use crate::geometry::{ackermann_predict, OdomSample, Point2, Pose2};
use crate::virtual_lidar::{FreeSpaceMask, VirtualScan, DEFAULT_SCALE, DEFAULT_SIZE_PX};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    /// Meters, per coordinate.
    pub feature_sigma: f64,
    /// Pixels.
    pub mask_boundary_jitter: usize,
    /// Meters per meter traveled.
    pub odom_translation_sigma: f64,
    /// Radians per radian turned.
    pub odom_rotation_sigma: f64,
    pub descriptor_flip_bits: usize,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            feature_sigma: 0.02,
            mask_boundary_jitter: 1,
            odom_translation_sigma: 0.01,
            odom_rotation_sigma: 0.01,
            descriptor_flip_bits: 0,
            seed: 0,
        }
    }
}

impl NoiseConfig {
    pub fn noise_free(seed: u64) -> Self {
        Self {
            feature_sigma: 0.0,
            mask_boundary_jitter: 0,
            odom_translation_sigma: 0.0,
            odom_rotation_sigma: 0.0,
            descriptor_flip_bits: 0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.feature_sigma >= 0.0
            && self.odom_translation_sigma >= 0.0
            && self.odom_rotation_sigma >= 0.0)
        {
            return Err(Error::InvalidParameter("noise sigmas must be >= 0".into()));
        }
        if self.descriptor_flip_bits > 256 {
            return Err(Error::InvalidParameter("descriptor_flip_bits must be <= 256".into()));
        }
        Ok(())
    }
}

/// Mask rendering geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorConfig {
    pub size_px: usize,
    /// Meters per pixel.
    pub scale: f64,
    /// Obstacles hide whatever lies behind them when set.
    pub occlusion: bool,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            size_px: DEFAULT_SIZE_PX,
            scale: DEFAULT_SCALE,
            occlusion: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlSegment {
    /// Seconds.
    pub duration: f64,
    /// Meters per second.
    pub speed: f64,
    /// Front-wheel angle, radians.
    pub steering: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySpec {
    pub segments: Vec<ControlSegment>,
    /// Hz.
    pub frame_rate: f64,
    pub start: Pose2,
}

impl TrajectorySpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.frame_rate > 0.0) {
            return Err(Error::InvalidParameter("frame_rate must be positive".into()));
        }
        if self.segments.is_empty() {
            return Err(Error::InvalidParameter("trajectory has no segments".into()));
        }
        if self.segments.iter().any(|s| !(s.duration > 0.0)) {
            return Err(Error::InvalidParameter("segment durations must be positive".into()));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn frame_count(&self) -> usize {
        (self.duration() * self.frame_rate + 1e-9).floor() as usize + 1
    }
}

/// Ground-truth poses at `1 / frame_rate` spacing, integrating each control
/// segment with the exact arc model.
pub fn simulate_trajectory(spec: &TrajectorySpec, wheelbase: f64) -> Result<Vec<(f64, Pose2)>> {
    spec.validate()?;
    if !(wheelbase > 0.0) {
        return Err(Error::InvalidParameter("wheelbase must be positive".into()));
    }
    let n = spec.frame_count();
    let dt = 1.0 / spec.frame_rate;
    let mut out = Vec::with_capacity(n);
    let mut pose = spec.start;
    out.push((0.0, pose));
    // segment boundaries on the absolute time axis
    let mut ends = Vec::with_capacity(spec.segments.len());
    let mut acc = 0.0;
    for s in &spec.segments {
        acc += s.duration;
        ends.push(acc);
    }
    let mut seg = 0;
    for k in 1..n {
        let (t0, t1) = ((k - 1) as f64 * dt, k as f64 * dt);
        let mut t = t0;
        while t < t1 {
            while seg + 1 < ends.len() && ends[seg] <= t {
                seg += 1;
            }
            let stop = if seg + 1 < ends.len() { ends[seg].min(t1) } else { t1 };
            let control = spec.segments[seg];
            pose = ackermann_predict(&pose, control.speed, control.steering, wheelbase, stop - t)?;
            t = stop;
        }
        out.push((k as f64 / spec.frame_rate, pose));
    }
    Ok(out)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based key for `(seed, stream, frame, entity)`.
fn key(seed: u64, stream: u64, frame: u64, entity: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed ^ stream.rotate_left(48)) ^ frame) ^ entity)
}

const STREAM_JITTER: u64 = 1;
const STREAM_FEATURE: u64 = 2;
const STREAM_ODOMETRY: u64 = 3;

fn entity_rng(seed: u64, stream: u64, frame: u64, entity: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(key(seed, stream, frame, entity))
}

/// Renders the free-space mask seen from `pose`. A pixel is FREE when its
/// center lies in the world bounds, outside every obstacle, and (with
/// occlusion) is not hidden behind an obstacle as seen from the vehicle.
pub fn render_mask(
    world: &World,
    pose: &Pose2,
    sensor: &SensorConfig,
    noise: &NoiseConfig,
    frame_index: u64,
) -> Result<FreeSpaceMask> {
    let origin = Point2::new(pose.x, pose.y);
    if !world.is_free(&origin) {
        return Err(Error::PoseInObstacle {
            x: pose.x,
            y: pose.y,
        });
    }
    let mut mask = FreeSpaceMask::all_free(sensor.size_px, sensor.scale)?;
    let reach = mask.half_extent() * std::f64::consts::SQRT_2;
    let near: Vec<&ConvexPolygon> = world
        .obstacles
        .iter()
        .filter(|o| {
            let c = o.vertices().iter().fold(Point2::origin(), |acc, v| acc + v.coords)
                / o.vertices().len() as f64;
            (c - origin).norm() - o.bounding_radius(&c) <= reach
        })
        .collect();
    let shadows: Vec<_> = if sensor.occlusion {
        near.iter().filter_map(|o| o.shadow(&origin)).collect()
    } else {
        Vec::new()
    };

    let n = sensor.size_px;
    let first = pose.transform_point(&mask.pixel_to_vehicle(0, 0));
    let (s, c) = pose.theta.sin_cos();
    // one row down is -scale along vehicle x, one column right is -scale along y
    let row_step = Vector2::new(-c, -s) * sensor.scale;
    let col_step = Vector2::new(s, -c) * sensor.scale;
    let mut classes = vec![false; n * n];
    for r in 0..n {
        let row_start = first + row_step * r as f64;
        for col in 0..n {
            let p = row_start + col_step * col as f64;
            classes[r * n + col] = world.bounds.contains(&p)
                && !near.iter().any(|o| o.contains(&p))
                && !shadows.iter().any(|sh| sh.covers(&p));
        }
    }
    if noise.mask_boundary_jitter > 0 {
        classes = jitter_boundary(&classes, n, noise.mask_boundary_jitter, noise.seed, frame_index);
    }
    mask.cells_mut().copy_from_slice(&classes);
    Ok(mask)
}

/// Flips, with probability one half, every pixel that has a differently
/// classified pixel within Chebyshev distance `radius`.
fn jitter_boundary(classes: &[bool], n: usize, radius: usize, seed: u64, frame: u64) -> Vec<bool> {
    let mut out = classes.to_vec();
    for r in 0..n {
        for c in 0..n {
            let here = classes[r * n + c];
            let (r0, r1) = (r.saturating_sub(radius), (r + radius).min(n - 1));
            let (c0, c1) = (c.saturating_sub(radius), (c + radius).min(n - 1));
            let near_boundary =
                (r0..=r1).any(|i| (c0..=c1).any(|j| classes[i * n + j] != here));
            if near_boundary && key(seed, STREAM_JITTER, frame, (r * n + c) as u64) >> 63 == 1 {
                out[r * n + c] = !here;
            }
        }
    }
    out
}

/// Landmarks inside the mask footprint, expressed in the vehicle frame,
/// perturbed by the noise model and kept only where the mask is FREE.
pub fn observe_features(
    world: &World,
    pose: &Pose2,
    mask: &FreeSpaceMask,
    noise: &NoiseConfig,
    frame_index: u64,
) -> FeatureFrame {
    let inv = pose.inverse();
    let half = mask.half_extent();
    let normal = Normal::new(0.0, noise.feature_sigma).ok();
    let mut features = Vec::new();
    for lm in &world.landmarks {
        let local = inv.transform_point(&lm.position);
        if local.x.abs() >= half || local.y.abs() >= half {
            continue;
        }
        let mut position = local;
        let mut descriptor = lm.descriptor;
        if noise.feature_sigma > 0.0 || noise.descriptor_flip_bits > 0 {
            let mut rng = entity_rng(noise.seed, STREAM_FEATURE, frame_index, lm.id);
            if let (Some(dist), true) = (normal, noise.feature_sigma > 0.0) {
                position.x += dist.sample(&mut rng);
                position.y += dist.sample(&mut rng);
            }
            for bit in rand::seq::index::sample(&mut rng, 256, noise.descriptor_flip_bits) {
                descriptor.flip_bit(bit);
            }
        }
        if mask
            .vehicle_to_pixel(&position)
            .is_some_and(|(r, c)| mask.is_free(r, c))
        {
            features.push(Feature {
                id: lm.id,
                position,
                descriptor,
            });
        }
    }
    FeatureFrame {
        timestamp: 0.0,
        features,
    }
}

/// Wheel odometry from ground truth: each step's delta is scaled by
/// `1 + bias + white`, where the bias is drawn once per sequence and the
/// white term per step, both with the configured sigma. Translation and
/// rotation use separate draws. Zero sigmas return the truth unchanged.
pub fn corrupt_odometry(truth: &[(f64, Pose2)], noise: &NoiseConfig) -> Vec<OdomSample> {
    if noise.odom_translation_sigma == 0.0 && noise.odom_rotation_sigma == 0.0 {
        return truth.iter().map(|&(t, p)| OdomSample::new(t, p)).collect();
    }
    let draw = |sigma: f64, rng: &mut ChaCha8Rng| {
        if sigma > 0.0 {
            Normal::new(0.0, sigma).map(|d| d.sample(rng)).unwrap_or(0.0)
        } else {
            0.0
        }
    };
    let mut bias_rng = entity_rng(noise.seed, STREAM_ODOMETRY, u64::MAX, 0);
    let bias_t = draw(noise.odom_translation_sigma, &mut bias_rng);
    let bias_r = draw(noise.odom_rotation_sigma, &mut bias_rng);
    let mut out = Vec::with_capacity(truth.len());
    let Some(&(t0, p0)) = truth.first() else {
        return out;
    };
    out.push(OdomSample::new(t0, p0));
    let mut pose = p0;
    for (k, pair) in truth.windows(2).enumerate() {
        let delta = pair[0].1.relative(&pair[1].1);
        let mut rng = entity_rng(noise.seed, STREAM_ODOMETRY, k as u64 + 1, 0);
        let st = 1.0 + bias_t + draw(noise.odom_translation_sigma, &mut rng);
        let sr = 1.0 + bias_r + draw(noise.odom_rotation_sigma, &mut rng);
        let noisy = Pose2::new(delta.x * st, delta.y * st, delta.theta * sr);
        pose = pose.compose(&noisy);
        out.push(OdomSample::new(pair[1].0, pose));
    }
    out
}

fn bin_center_angles(angle_increment: f64) -> impl Iterator<Item = f64> {
    let bins = crate::virtual_lidar::bin_count(angle_increment);
    (0..bins).map(move |b| -PI + (b as f64 + 0.5) * angle_increment)
}

/// Exact first-hit scan inside an axis-aligned `width x height` room
/// centered at the origin, one ray per bin center, seen from `pose`.
pub fn room_scan(width: f64, height: f64, pose: &Pose2, angle_increment: f64) -> VirtualScan {
    let room = World::new(Bounds {
        min: Point2::new(-width / 2.0, -height / 2.0),
        max: Point2::new(width / 2.0, height / 2.0),
    });
    analytic_scan(&room, pose, angle_increment, f64::INFINITY)
}

/// First returns against obstacles and world bounds along every bin-center
/// ray, limited to `max_range`.
pub fn analytic_scan(world: &World, pose: &Pose2, angle_increment: f64, max_range: f64) -> VirtualScan {
    let origin = Point2::new(pose.x, pose.y);
    let points: Vec<Point2> = bin_center_angles(angle_increment)
        .filter_map(|phi| {
            let (s, c) = phi.sin_cos();
            let dir = Vector2::new(
                pose.theta.cos() * c - pose.theta.sin() * s,
                pose.theta.sin() * c + pose.theta.cos() * s,
            );
            let t = world.first_hit(&origin, &dir)?;
            (t > 0.0 && t <= max_range).then(|| Point2::new(t * c, t * s))
        })
        .collect();
    VirtualScan::from_points(&points, angle_increment)
}

/// Everything a simulated sequence needs.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedSequence {
    pub truth: Vec<(f64, Pose2)>,
    pub odometry: Vec<OdomSample>,
    pub wheelbase: f64,
    pub frame_rate: f64,
}

pub fn simulate_sequence(spec: &TrajectorySpec, wheelbase: f64, noise: &NoiseConfig) -> Result<SimulatedSequence> {
    noise.validate()?;
    let truth = simulate_trajectory(spec, wheelbase)?;
    let odometry = corrupt_odometry(&truth, noise);
    Ok(SimulatedSequence {
        truth,
        odometry,
        wheelbase,
        frame_rate: spec.frame_rate,
    })
}

/// Renders one frame: mask plus features with the frame timestamp.
pub fn render_frame(
    world: &World,
    pose: &Pose2,
    timestamp: f64,
    sensor: &SensorConfig,
    noise: &NoiseConfig,
    frame_index: u64,
) -> Result<(FreeSpaceMask, FeatureFrame)> {
    let mask = render_mask(world, pose, sensor, noise, frame_index)?;
    let mut features = observe_features(world, pose, &mask, noise, frame_index);
    features.timestamp = timestamp;
    Ok((mask, features))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open_world() -> World {
        World::new(Bounds::new(-50.0, -50.0, 50.0, 50.0).unwrap())
    }

    fn small_sensor() -> SensorConfig {
        SensorConfig {
            size_px: 101,
            scale: 0.05,
            occlusion: true,
        }
    }

    #[test]
    fn empty_world_renders_all_free() {
        let m = render_mask(&open_world(), &Pose2::IDENTITY, &small_sensor(), &NoiseConfig::noise_free(0), 0)
            .unwrap();
        assert_eq!(m.count_free(), 101 * 101);
    }

    #[test]
    fn pose_inside_obstacle_is_rejected() {
        let w = open_world().with_obstacle(ConvexPolygon::axis_box(-1.0, -1.0, 1.0, 1.0).unwrap());
        let err = render_mask(&w, &Pose2::IDENTITY, &small_sensor(), &NoiseConfig::noise_free(0), 0);
        assert!(matches!(err, Err(Error::PoseInObstacle { .. })));
    }

    #[test]
    fn obstacle_footprint_and_shadow_match_oracle() {
        let square = ConvexPolygon::axis_box(1.0, -0.5, 2.0, 0.5).unwrap();
        let w = open_world().with_obstacle(square.clone());
        let sensor = small_sensor();
        let pose = Pose2::new(0.1, 0.2, 0.3);
        let m = render_mask(&w, &pose, &sensor, &NoiseConfig::noise_free(0), 0).unwrap();
        let origin = Point2::new(pose.x, pose.y);
        for r in 0..101 {
            for c in 0..101 {
                let p = pose.transform_point(&m.pixel_to_vehicle(r, c));
                // march along the segment from the vehicle to the pixel
                let blocked = (0..=2000).any(|i| {
                    let t = i as f64 / 2000.0;
                    square.contains(&(origin + (p - origin) * t))
                });
                let expected_free = !blocked;
                let d = (p - origin).norm();
                let near_edge = square
                    .vertices()
                    .iter()
                    .any(|v| ((v - origin).normalize() - (p - origin) / d).norm() < 2e-3);
                if !near_edge {
                    assert_eq!(m.is_free(r, c), expected_free, "pixel {r},{c}");
                }
            }
        }
        // nearest obstacle pixel straight ahead sits on the near face
        let ahead = analytic_scan(&w, &pose, 1f64.to_radians(), 10.0);
        assert!(ahead.points.iter().all(|p| p.range > 0.5));
    }

    #[test]
    fn rendering_is_deterministic_and_jitter_is_local() {
        let w = open_world().with_obstacle(ConvexPolygon::axis_box(1.0, -0.5, 2.0, 0.5).unwrap());
        let noise = NoiseConfig {
            mask_boundary_jitter: 1,
            ..NoiseConfig::noise_free(5)
        };
        let a = render_mask(&w, &Pose2::IDENTITY, &small_sensor(), &noise, 7).unwrap();
        let b = render_mask(&w, &Pose2::IDENTITY, &small_sensor(), &noise, 7).unwrap();
        assert_eq!(a, b);
        let clean = render_mask(&w, &Pose2::IDENTITY, &small_sensor(), &NoiseConfig::noise_free(5), 7).unwrap();
        let mut flipped = 0;
        for r in 0..101 {
            for c in 0..101 {
                if a.is_free(r, c) != clean.is_free(r, c) {
                    flipped += 1;
                    let here = clean.is_free(r, c);
                    let boundary = (r.saturating_sub(1)..=(r + 1).min(100))
                        .any(|i| (c.saturating_sub(1)..=(c + 1).min(100)).any(|j| clean.is_free(i, j) != here));
                    assert!(boundary);
                }
            }
        }
        assert!(flipped > 0);
    }

    #[test]
    fn straight_and_stationary_trajectories() {
        let spec = TrajectorySpec {
            segments: vec![ControlSegment {
                duration: 10.0,
                speed: 0.5,
                steering: 0.0,
            }],
            frame_rate: 10.0,
            start: Pose2::IDENTITY,
        };
        let traj = simulate_trajectory(&spec, 2.7).unwrap();
        assert_eq!(traj.len(), 101);
        let (t, end) = traj[100];
        assert!((t - 10.0).abs() < 1e-12);
        assert!((end.x - 5.0).abs() < 1e-9 && end.y.abs() < 1e-12 && end.theta == 0.0);

        let still = TrajectorySpec {
            segments: vec![ControlSegment {
                duration: 1.0,
                speed: 0.0,
                steering: 0.2,
            }],
            frame_rate: 5.0,
            start: Pose2::new(1.0, 2.0, 0.5),
        };
        let traj = simulate_trajectory(&still, 2.7).unwrap();
        assert!(traj.iter().all(|(_, p)| *p == still.start));
    }

    #[test]
    fn constant_turn_stays_on_circle() {
        let (wheelbase, steering) = (2.5, 0.3f64);
        let radius = wheelbase / steering.tan();
        let spec = TrajectorySpec {
            segments: vec![
                ControlSegment { duration: 7.3, speed: 0.6, steering },
                ControlSegment { duration: 4.1, speed: 0.4, steering },
            ],
            frame_rate: 7.0,
            start: Pose2::IDENTITY,
        };
        let traj = simulate_trajectory(&spec, wheelbase).unwrap();
        // turning left from the origin: center at (0, radius)
        for (_, p) in traj {
            let d = (p.x * p.x + (p.y - radius).powi(2)).sqrt();
            assert!((d - radius).abs() < 1e-9);
        }
    }

    #[test]
    fn odometry_noise_model() {
        let spec = TrajectorySpec {
            segments: vec![ControlSegment { duration: 20.0, speed: 0.5, steering: 0.1 }],
            frame_rate: 10.0,
            start: Pose2::IDENTITY,
        };
        let truth = simulate_trajectory(&spec, 2.7).unwrap();
        let exact = corrupt_odometry(&truth, &NoiseConfig::noise_free(1));
        assert!(exact.iter().zip(&truth).all(|(o, (t, p))| o.pose == *p && o.timestamp == *t));

        let still: Vec<_> = (0..50).map(|k| (k as f64 * 0.1, Pose2::new(3.0, 1.0, 0.2))).collect();
        let odo = corrupt_odometry(&still, &NoiseConfig::default());
        assert!(odo.iter().all(|o| o.pose == still[0].1));
    }

    #[test]
    fn odometry_drift_is_about_one_percent() {
        // 100 m straight line, mean absolute endpoint error over seeds
        let truth: Vec<_> = (0..=1000).map(|k| (k as f64 * 0.1, Pose2::new(k as f64 * 0.1, 0.0, 0.0))).collect();
        let trials = 200;
        let mean_err: f64 = (0..trials)
            .map(|seed| {
                let noise = NoiseConfig { seed, ..NoiseConfig::default() };
                let end = corrupt_odometry(&truth, &noise).last().unwrap().pose;
                (end.x - 100.0).hypot(end.y)
            })
            .sum::<f64>()
            / trials as f64;
        // E|N(0, 1 m)| = 0.80 m
        assert!(mean_err > 0.5 && mean_err < 1.2, "{mean_err}");
    }

    #[test]
    fn features_follow_landmarks_and_roi() {
        let mut w = open_world().with_obstacle(ConvexPolygon::axis_box(2.0, -1.0, 3.0, 1.0).unwrap());
        w.landmarks.push(Landmark {
            id: 7,
            position: Point2::new(1.0, 0.0),
            descriptor: crate::feature_matcher::Descriptor([1, 2, 3, 4]),
        });
        w.landmarks.push(Landmark {
            id: 8,
            position: Point2::new(3.5, 0.0),
            descriptor: crate::feature_matcher::Descriptor([5, 6, 7, 8]),
        });
        let noise = NoiseConfig::noise_free(0);
        let sensor = small_sensor();
        let (mask, frame) = render_frame(&w, &Pose2::IDENTITY, 0.0, &sensor, &noise, 0).unwrap();
        assert_eq!(frame.features.len(), 1);
        assert_eq!(frame.features[0].position, Point2::new(1.0, 0.0));
        assert_eq!(frame.features[0].descriptor, w.landmarks[0].descriptor);
        for f in &frame.features {
            let (r, c) = mask.vehicle_to_pixel(&f.position).unwrap();
            assert!(mask.is_free(r, c));
        }
    }

    #[test]
    fn feature_noise_statistics() {
        let mut w = open_world();
        w.landmarks.push(Landmark {
            id: 1,
            position: Point2::new(1.0, 0.5),
            descriptor: Default::default(),
        });
        let noise = NoiseConfig {
            feature_sigma: 0.02,
            ..NoiseConfig::noise_free(11)
        };
        let mask = FreeSpaceMask::all_free(101, 0.05).unwrap();
        let samples: Vec<f64> = (0..10_000u64)
            .map(|k| observe_features(&w, &Pose2::IDENTITY, &mask, &noise, k).features[0].position.x - 1.0)
            .collect();
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (samples.len() - 1) as f64;
        assert!((var.sqrt() - 0.02).abs() < 0.02 * 0.05);
    }

    #[test]
    fn room_scan_geometry() {
        let scan = room_scan(8.0, 6.0, &Pose2::IDENTITY, 1f64.to_radians());
        assert_eq!(scan.len(), 360);
        for p in &scan.points {
            let on_wall = (p.point.x.abs() - 4.0).abs() < 1e-9 || (p.point.y.abs() - 3.0).abs() < 1e-9;
            assert!(on_wall, "{:?}", p.point);
        }
    }

    /// Away from depth discontinuities and steep incidence, each return
    /// sits within 1.5 px of the nearest surface point in its bin. The bin
    /// is widened by the angular size of 1.5 px because a border pixel can
    /// belong to the bin next to its obstacle neighbor.
    #[test]
    fn noise_free_scan_matches_analytic_surface() {
        let sc = parking_loop(1, 5.0);
        let params = crate::virtual_lidar::VirtualLidarParams::default();
        let poses = simulate_trajectory(&sc.trajectory, sc.wheelbase).unwrap();
        let mut checked = 0;
        for (_, pose) in poses.iter().step_by(60) {
            let mask = render_mask(&sc.world, pose, &sc.sensor, &NoiseConfig::noise_free(0), 0).unwrap();
            let s = mask.scale();
            let (scan, _) = crate::virtual_lidar::make_scan(&mask, &params).unwrap();
            let lim = mask.half_extent() - params.border_margin_px as f64 * s;
            let hit = |phi: f64| {
                let dir = Vector2::new((pose.theta + phi).cos(), (pose.theta + phi).sin());
                let (sn, c) = phi.sin_cos();
                sc.world
                    .first_hit(&Point2::new(pose.x, pose.y), &dir)
                    .filter(|t| (t * c).abs() <= lim && (t * sn).abs() <= lim)
            };
            for p in &scan.points {
                let pad = 1.5 * s / p.range;
                let lo = p.bin as f64 * params.angle_increment - PI - pad;
                let span = params.angle_increment + 2.0 * pad;
                let ranges: Option<Vec<f64>> = (0..=100).map(|k| hit(lo + span * k as f64 / 100.0)).collect();
                let Some(ranges) = ranges else { continue };
                let near = ranges.iter().copied().fold(f64::INFINITY, f64::min);
                let far = ranges.iter().copied().fold(0.0, f64::max);
                if far - near > 3.0 * s {
                    continue;
                }
                checked += 1;
                assert!((p.range - near).abs() <= 1.5 * s, "bin {} at {:?}: {} vs {}", p.bin, pose, p.range, near);
            }
        }
        assert!(checked > 300, "{checked}");
    }
}
