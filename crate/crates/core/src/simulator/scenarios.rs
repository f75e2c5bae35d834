//! Ready-made worlds and drives.

use crate::geometry::{Point2, Pose2};

use super::{Bounds, ControlSegment, ConvexPolygon, SensorConfig, TrajectorySpec, World};

pub const DEFAULT_WHEELBASE: f64 = 2.7;
pub const LANDMARK_DENSITY: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub world: World,
    pub trajectory: TrajectorySpec,
    pub wheelbase: f64,
    pub sensor: SensorConfig,
}

fn car(x0: f64, y0: f64, along_y: bool) -> ConvexPolygon {
    let (w, l) = (2.0, 4.5);
    let poly = if along_y {
        ConvexPolygon::axis_box(x0, y0, x0 + w, y0 + l)
    } else {
        ConvexPolygon::axis_box(x0, y0, x0 + l, y0 + w)
    };
    poly.expect("static car footprint")
}

fn pillar(x: f64, y: f64) -> ConvexPolygon {
    ConvexPolygon::axis_box(x - 0.3, y - 0.3, x + 0.3, y + 0.3).expect("static pillar")
}

/// Parking lot around a rectangular loop with corners at (0, 0), (27, 5),
/// (22, 22) and (-5, 17): parked cars on both sides, pillars in the middle
/// island, and landmarks at three per square meter of free space.
pub fn parking_loop_world(seed: u64) -> World {
    parking_loop_world_with(seed, LANDMARK_DENSITY)
}

/// [`parking_loop_world`] with a chosen landmark density per square meter.
pub fn parking_loop_world_with(seed: u64, landmark_density: f64) -> World {
    let bounds = Bounds::new(-16.0, -11.0, 38.0, 33.0).expect("static bounds");
    let mut world = World::new(bounds);
    for x0 in [1.0, 4.0, 7.0, 13.0, 16.0, 19.0] {
        world.obstacles.push(car(x0, 2.5, true));
    }
    for x0 in [1.0, 4.0, 10.0, 13.0, 16.0, 19.0] {
        world.obstacles.push(car(x0, 15.0, true));
    }
    for (x, y) in [(6.0, 11.0), (12.0, 11.0), (18.0, 11.0)] {
        world.obstacles.push(pillar(x, y));
    }
    world.obstacles.push(
        ConvexPolygon::rectangle(Point2::new(15.0, 11.0), 1.5, 0.8, 0.4).expect("static box"),
    );
    for x0 in [-3.0, 0.0, 3.0, 6.0, 12.0, 15.0, 18.0, 21.0, 24.0] {
        world.obstacles.push(car(x0, -7.0, true));
    }
    for x0 in [-3.0, 0.0, 6.0, 9.0, 12.0, 18.0, 21.0, 24.0] {
        world.obstacles.push(car(x0, 24.5, true));
    }
    for y0 in [-1.0, 2.0, 5.0, 11.0, 14.0, 17.0, 20.0] {
        world.obstacles.push(car(29.5, y0, false));
    }
    for y0 in [-1.0, 2.0, 8.0, 11.0, 14.0, 20.0] {
        world.obstacles.push(car(-12.0, y0, false));
    }
    world.scatter_landmarks(&bounds, landmark_density, seed);
    world
}

/// The ~99.4 m loop driven counter-clockwise: straights at 0.68 m/s and
/// 5 m radius turns at 0.45 m/s (mean speed about 0.59 m/s).
pub fn parking_loop(seed: u64, frame_rate: f64) -> ScenarioSpec {
    parking_loop_with(seed, frame_rate, LANDMARK_DENSITY)
}

pub fn parking_loop_with(seed: u64, frame_rate: f64, landmark_density: f64) -> ScenarioSpec {
    let wheelbase = DEFAULT_WHEELBASE;
    let steering = (wheelbase / 5.0).atan();
    let arc = 5.0 * std::f64::consts::FRAC_PI_2;
    let straight = |len: f64| ControlSegment {
        duration: len / 0.68,
        speed: 0.68,
        steering: 0.0,
    };
    let turn = ControlSegment {
        duration: arc / 0.45,
        speed: 0.45,
        steering,
    };
    let segments = vec![
        straight(22.0),
        turn,
        straight(12.0),
        turn,
        straight(22.0),
        turn,
        straight(12.0),
        turn,
    ];
    ScenarioSpec {
        world: parking_loop_world_with(seed, landmark_density),
        trajectory: TrajectorySpec {
            segments,
            frame_rate,
            start: Pose2::IDENTITY,
        },
        wheelbase,
        sensor: SensorConfig::default(),
    }
}

/// A 50 m straight drive: open ground with landmarks for the first part,
/// then a row of parked cars on bare ground with no landmarks.
pub fn complementarity_world(seed: u64, frame_rate: f64) -> ScenarioSpec {
    complementarity_world_with(seed, frame_rate, LANDMARK_DENSITY)
}

pub fn complementarity_world_with(seed: u64, frame_rate: f64, landmark_density: f64) -> ScenarioSpec {
    let bounds = Bounds::new(-20.0, -20.0, 75.0, 20.0).expect("static bounds");
    let mut world = World::new(bounds);
    for x0 in [26.0, 29.0, 32.0, 38.0, 41.0, 47.0, 50.0, 53.0, 59.0, 62.0] {
        world.obstacles.push(car(x0, 2.5, true));
    }
    for x0 in [27.0, 33.0, 36.0, 39.0, 45.0, 48.0, 54.0, 57.0, 63.0] {
        world.obstacles.push(car(x0, -7.0, true));
    }
    for x in [35.5, 44.0, 51.5] {
        world.obstacles.push(pillar(x, 4.5));
    }
    let textured = Bounds::new(-20.0, -20.0, 24.0, 20.0).expect("static bounds");
    world.scatter_landmarks(&textured, landmark_density, seed);
    ScenarioSpec {
        world,
        trajectory: TrajectorySpec {
            segments: vec![ControlSegment {
                duration: 100.0,
                speed: 0.5,
                steering: 0.0,
            }],
            frame_rate,
            start: Pose2::IDENTITY,
        },
        wheelbase: DEFAULT_WHEELBASE,
        sensor: SensorConfig::default(),
    }
}

/// Named scenario selectable from configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    ParkingLoop,
    Complementarity,
}

impl Scenario {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::ParkingLoop => "parking_loop",
            Scenario::Complementarity => "complementarity",
        }
    }

    pub fn build(&self, seed: u64, frame_rate: f64, landmark_density: f64) -> ScenarioSpec {
        match self {
            Scenario::ParkingLoop => parking_loop_with(seed, frame_rate, landmark_density),
            Scenario::Complementarity => complementarity_world_with(seed, frame_rate, landmark_density),
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> crate::error::Result<Self> {
        match s {
            "parking_loop" => Ok(Scenario::ParkingLoop),
            "complementarity" => Ok(Scenario::Complementarity),
            _ => Err(crate::error::Error::InvalidParameter(format!(
                "unknown scenario `{s}` (expected parking_loop or complementarity)"
            ))),
        }
    }
}
