//! INI-style run configuration: `[section]` headers, `key = value` lines and
//! `#` comments. Every tunable has a default; unknown keys are errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::evaluation::DEFAULT_ALIGN_POSES;
use crate::simulator::{NoiseConfig, Scenario, SensorConfig, DEFAULT_WHEELBASE, LANDMARK_DENSITY};
use crate::tracker::{Mode, TrackerConfig};
use crate::virtual_lidar::VirtualLidarParams;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub scenario: Scenario,
    /// Seeds world layout and landmark descriptors.
    pub world_seed: u64,
    pub frame_rate_hz: f64,
    pub wheelbase_m: f64,
    /// Landmarks per square meter; 3.0 gives roughly 500 inside the
    /// 15.3 m mask footprint.
    pub landmark_density: f64,
    /// Truncates the drive; `0` keeps every frame.
    pub max_frames: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::ParkingLoop,
            world_seed: 1,
            frame_rate_hz: 5.0,
            wheelbase_m: DEFAULT_WHEELBASE,
            landmark_density: LANDMARK_DENSITY,
            max_frames: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationConfig {
    /// Empty means the defaults scaled to the path length.
    pub segments: Vec<f64>,
    pub align_poses: usize,
    pub align: bool,
    pub with_scale: bool,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            segments: Vec::new(),
            align_poses: DEFAULT_ALIGN_POSES,
            align: true,
            with_scale: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub tracker: TrackerConfig,
    pub lidar: VirtualLidarParams,
    pub sensor: SensorConfig,
    pub noise: NoiseConfig,
    pub simulation: SimulationConfig,
    pub evaluation: EvaluationConfig,
    pub dataset: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

trait Value: Sized {
    fn parse_value(text: &str) -> std::result::Result<Self, String>;
    fn format_value(&self) -> String;
}

macro_rules! from_str_value {
    ($($t:ty),*) => {$(
        impl Value for $t {
            fn parse_value(text: &str) -> std::result::Result<Self, String> {
                text.parse::<$t>().map_err(|e| e.to_string())
            }
            fn format_value(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

from_str_value!(usize, u64, u32, bool);

impl Value for f64 {
    fn parse_value(text: &str) -> std::result::Result<Self, String> {
        let v: f64 = text.parse().map_err(|e: std::num::ParseFloatError| e.to_string())?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err("value must be finite".into())
        }
    }
    fn format_value(&self) -> String {
        self.to_string()
    }
}

impl Value for Mode {
    fn parse_value(text: &str) -> std::result::Result<Self, String> {
        text.parse().map_err(|e: Error| e.to_string())
    }
    fn format_value(&self) -> String {
        self.as_str().into()
    }
}

impl Value for Scenario {
    fn parse_value(text: &str) -> std::result::Result<Self, String> {
        text.parse().map_err(|e: Error| e.to_string())
    }
    fn format_value(&self) -> String {
        self.as_str().into()
    }
}

impl Value for Option<PathBuf> {
    fn parse_value(text: &str) -> std::result::Result<Self, String> {
        Ok((!text.is_empty()).then(|| PathBuf::from(text)))
    }
    fn format_value(&self) -> String {
        self.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
    }
}

impl Value for Vec<f64> {
    fn parse_value(text: &str) -> std::result::Result<Self, String> {
        parse_float_list(text)
    }
    fn format_value(&self) -> String {
        self.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
    }
}

/// Parses `"4,8,16"`; an empty string gives an empty list.
pub fn parse_float_list(text: &str) -> std::result::Result<Vec<f64>, String> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',').map(|t| f64::parse_value(t.trim())).collect()
}

struct Field {
    section: &'static str,
    key: &'static str,
    get: fn(&RunConfig) -> String,
    set: fn(&mut RunConfig, &str) -> std::result::Result<(), String>,
}

macro_rules! field {
    ($section:literal, $key:literal, $($path:ident).+ : $t:ty) => {
        Field {
            section: $section,
            key: $key,
            get: |c| <$t as Value>::format_value(&c.$($path).+),
            set: |c, v| {
                c.$($path).+ = <$t as Value>::parse_value(v)?;
                Ok(())
            },
        }
    };
}

fn fields() -> Vec<Field> {
    vec![
        field!("run", "mode", tracker.mode: Mode),
        field!("run", "dataset", dataset: Option<PathBuf>),
        field!("run", "output", output: Option<PathBuf>),
        field!("sensor", "scale_m_per_px", sensor.scale: f64),
        field!("sensor", "image_size_px", sensor.size_px: usize),
        field!("sensor", "occlusion", sensor.occlusion: bool),
        field!("virtual_lidar", "kernel_px", lidar.kernel_px: usize),
        field!("virtual_lidar", "min_area_px", lidar.min_area_px: usize),
        field!("virtual_lidar", "border_margin_px", lidar.border_margin_px: usize),
        Field {
            section: "virtual_lidar",
            key: "angle_increment_deg",
            get: |c| degrees_text(c.lidar.angle_increment),
            set: |c, v| {
                c.lidar.angle_increment = f64::parse_value(v)?.to_radians();
                Ok(())
            },
        },
        field!("keyframe", "translation_m", tracker.kf_translation: f64),
        field!("keyframe", "rotation_rad", tracker.kf_rotation: f64),
        field!("keyframe", "time_s", tracker.kf_time: f64),
        field!("keyframe", "max_window", tracker.max_window: usize),
        field!("fallback", "translation_m", tracker.fallback_translation: f64),
        field!("fallback", "rotation_rad", tracker.fallback_rotation: f64),
        field!("fusion", "w_feature", tracker.weights.w_feature: f64),
        field!("fusion", "w_scan", tracker.weights.w_scan: f64),
        field!("fusion", "cauchy_c_feature", tracker.losses.feature.scale_c: f64),
        field!("fusion", "cauchy_c_scan", tracker.losses.scan.scale_c: f64),
        field!("direct_matcher", "radius_m", tracker.direct_match.radius: f64),
        field!("direct_matcher", "max_hamming", tracker.direct_match.max_hamming: u32),
        field!("scan_matcher", "max_iterations", tracker.scan_match.max_iterations: usize),
        field!("scan_matcher", "convergence_eps", tracker.scan_match.convergence_eps: f64),
        field!("scan_matcher", "max_correspondence_dist_m", tracker.scan_match.max_correspondence_dist: f64),
        field!("scan_matcher", "trim_fraction", tracker.scan_match.trim_fraction: f64),
        field!("ransac", "feature_threshold_m", tracker.feature_ransac.inlier_threshold: f64),
        field!("ransac", "scan_threshold_m", tracker.scan_ransac.inlier_threshold: f64),
        field!("ransac", "feature_max_iterations", tracker.feature_ransac.max_iterations: usize),
        field!("ransac", "scan_max_iterations", tracker.scan_ransac.max_iterations: usize),
        field!("ransac", "feature_seed", tracker.feature_ransac.seed: u64),
        field!("ransac", "scan_seed", tracker.scan_ransac.seed: u64),
        field!("noise", "feature_sigma_m", noise.feature_sigma: f64),
        field!("noise", "mask_boundary_jitter_px", noise.mask_boundary_jitter: usize),
        field!("noise", "odom_translation_sigma", noise.odom_translation_sigma: f64),
        field!("noise", "odom_rotation_sigma", noise.odom_rotation_sigma: f64),
        field!("noise", "descriptor_flip_bits", noise.descriptor_flip_bits: usize),
        field!("noise", "seed", noise.seed: u64),
        field!("simulation", "scenario", simulation.scenario: Scenario),
        field!("simulation", "world_seed", simulation.world_seed: u64),
        field!("simulation", "frame_rate_hz", simulation.frame_rate_hz: f64),
        field!("simulation", "wheelbase_m", simulation.wheelbase_m: f64),
        field!("simulation", "landmark_density_per_m2", simulation.landmark_density: f64),
        field!("simulation", "max_frames", simulation.max_frames: usize),
        field!("evaluation", "segments_m", evaluation.segments: Vec<f64>),
        field!("evaluation", "align_poses", evaluation.align_poses: usize),
        field!("evaluation", "align", evaluation.align: bool),
        field!("evaluation", "with_scale", evaluation.with_scale: bool),
    ]
}

/// Shortest decimal degree text that converts back to exactly `radians`.
fn degrees_text(radians: f64) -> String {
    let deg = radians.to_degrees();
    let short = (0..17).map(|digits| format!("{deg:.digits$e}").parse::<f64>().unwrap_or(deg));
    let neighbors = (0..8i64).flat_map(|k| [k, -k]).map(|k| f64::from_bits((deg.to_bits() as i64 + k) as u64));
    short
        .chain(neighbors)
        .find(|d| d.to_radians() == radians)
        .unwrap_or(deg)
        .to_string()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_named(text, Path::new("<config>"))
    }

    /// Applies `text` on top of the defaults. Errors carry the line number.
    pub fn parse_named(text: &str, origin: &Path) -> Result<Self> {
        let table = fields();
        let mut config = RunConfig::default();
        let mut section = String::new();
        let bad = |line: usize, msg: String| Error::format(origin, format!("line {line}: {msg}"));
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| bad(line_no, format!("malformed section header `{line}`")))?
                    .trim();
                if !table.iter().any(|f| f.section == name) {
                    return Err(bad(line_no, format!("unknown section `{name}`")));
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(line_no, format!("expected `key = value`, found `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let field = table
                .iter()
                .find(|f| f.section == section && f.key == key)
                .ok_or_else(|| {
                    if section.is_empty() {
                        bad(line_no, format!("unknown key `{key}` outside any section"))
                    } else {
                        bad(line_no, format!("unknown key `{key}` in section [{section}]"))
                    }
                })?;
            (field.set)(&mut config, value)
                .map_err(|e| bad(line_no, format!("invalid value for `{section}.{key}`: {e}")))?;
        }
        config.validate().map_err(|e| Error::format(origin, e.to_string()))?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_named(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        self.tracker.validate()?;
        self.noise.validate()?;
        if !(self.sensor.scale > 0.0) || self.sensor.size_px == 0 {
            return Err(Error::InvalidParameter("sensor scale and size must be positive".into()));
        }
        if !(self.lidar.angle_increment > 0.0) || self.lidar.kernel_px == 0 {
            return Err(Error::InvalidParameter(
                "angle increment and kernel size must be positive".into(),
            ));
        }
        let sim = &self.simulation;
        if !(sim.frame_rate_hz > 0.0 && sim.wheelbase_m > 0.0 && sim.landmark_density >= 0.0) {
            return Err(Error::InvalidParameter(
                "frame rate and wheelbase must be positive, landmark density non-negative".into(),
            ));
        }
        if self.evaluation.segments.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::InvalidParameter("segment lengths must be positive".into()));
        }
        Ok(())
    }

    /// Full configuration with every key, in a form [`RunConfig::parse`]
    /// reads back to an equal value.
    pub fn to_ini(&self) -> String {
        let mut out = String::new();
        let mut current = "";
        for f in fields() {
            if f.section != current {
                if !current.is_empty() {
                    out.push('\n');
                }
                let _ = writeln!(out, "[{}]", f.section);
                current = f.section;
            }
            let _ = writeln!(out, "{} = {}", f.key, (f.get)(self));
        }
        out
    }
}
