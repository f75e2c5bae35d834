//! Visual odometry for a car-like vehicle that fuses ground-plane feature
//! matches with range scans synthesized from a free-space mask.

// `!(x > 0.0)` style checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod feature_matcher;
pub mod geometry;
pub mod pipeline;
pub mod plot;
pub mod robust_estimation;
pub mod scan_matcher;
pub mod simulator;
pub mod tracker;
pub mod virtual_lidar;

pub use error::{Error, Result};
pub use geometry::{OdomSample, Point2, Pose2};
