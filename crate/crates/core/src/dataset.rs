//! On-disk dataset layout: `calib.txt`, `masks/NNNNNN.pgm`,
//! `features/NNNNNN.csv`, `odometry.csv` and `groundtruth.csv`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::feature_matcher::{read_feature_csv, write_feature_csv, FeatureFrame};
use crate::geometry::{OdomSample, Pose2};
use crate::simulator::{render_frame, simulate_sequence, NoiseConfig, SensorConfig, TrajectorySpec, World};
use crate::virtual_lidar::{read_pgm, write_pgm, FreeSpaceMask};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub scale_m_per_px: f64,
    pub image_size_px: usize,
    pub wheelbase_m: f64,
    pub frame_rate_hz: f64,
}

impl Calibration {
    pub fn to_text(&self) -> String {
        format!(
            "scale_m_per_px={}\nimage_size_px={}\nwheelbase_m={}\nframe_rate_hz={}\n",
            self.scale_m_per_px, self.image_size_px, self.wheelbase_m, self.frame_rate_hz
        )
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let (mut scale, mut size, mut wheelbase, mut rate) = (None, None, None, None);
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: &str| Error::format(path, format!("line {}: {msg}", i + 1));
            let (key, value) = line.split_once('=').ok_or_else(|| bad("expected key=value"))?;
            let value = value.trim();
            let float = || value.parse::<f64>().map_err(|_| bad(&format!("invalid value for {}", key.trim())));
            match key.trim() {
                "scale_m_per_px" => scale = Some(float()?),
                "image_size_px" => {
                    size = Some(value.parse::<usize>().map_err(|_| bad("invalid value for image_size_px"))?)
                }
                "wheelbase_m" => wheelbase = Some(float()?),
                "frame_rate_hz" => rate = Some(float()?),
                other => return Err(bad(&format!("unknown key `{other}`"))),
            }
        }
        let missing = |k: &str| Error::format(path, format!("missing key `{k}`"));
        let calib = Self {
            scale_m_per_px: scale.ok_or_else(|| missing("scale_m_per_px"))?,
            image_size_px: size.ok_or_else(|| missing("image_size_px"))?,
            wheelbase_m: wheelbase.ok_or_else(|| missing("wheelbase_m"))?,
            frame_rate_hz: rate.ok_or_else(|| missing("frame_rate_hz"))?,
        };
        if !(calib.scale_m_per_px > 0.0 && calib.frame_rate_hz > 0.0 && calib.image_size_px > 0) {
            return Err(Error::format(path, "scale, image size and frame rate must be positive"));
        }
        Ok(calib)
    }
}

/// One row of `odometry.csv`, `groundtruth.csv` or `trajectory.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseRow {
    pub frame: usize,
    pub timestamp: f64,
    pub pose: Pose2,
    /// Present only in tracker output.
    pub status: Option<String>,
}

pub const POSE_HEADER: &str = "frame,timestamp,x,y,theta";

pub fn pose_csv(rows: &[PoseRow], with_status: bool) -> String {
    let mut out = String::with_capacity(rows.len() * 64 + 40);
    out.push_str(POSE_HEADER);
    if with_status {
        out.push_str(",status");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{},{},{},{},{}", r.frame, r.timestamp, r.pose.x, r.pose.y, r.pose.theta);
        if with_status {
            let _ = write!(out, ",{}", r.status.as_deref().unwrap_or(""));
        }
        out.push('\n');
    }
    out
}

pub fn write_pose_csv(path: &Path, rows: &[PoseRow], with_status: bool) -> Result<()> {
    std::fs::write(path, pose_csv(rows, with_status)).map_err(|e| Error::io(path, e))
}

/// Reads a pose table; the `status` column is optional. Missing required
/// columns are reported by name.
pub fn read_pose_csv(path: &Path) -> Result<Vec<PoseRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::format(path, e.to_string()))?
        .clone();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let column = |name: &str| find(name).ok_or_else(|| Error::format(path, format!("missing column `{name}`")));
    let cols = [
        column("frame")?,
        column("timestamp")?,
        column("x")?,
        column("y")?,
        column("theta")?,
    ];
    let status_col = find("status");
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        let line = i + 2;
        let field = |c: usize, name: &str| {
            record
                .get(c)
                .map(str::trim)
                .ok_or_else(|| Error::format(path, format!("line {line}: missing `{name}`")))
        };
        let float = |c: usize, name: &str| -> Result<f64> {
            let v = field(c, name)?;
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::format(path, format!("line {line}: invalid {name} `{v}`")))
        };
        let frame_text = field(cols[0], "frame")?;
        let frame = frame_text
            .parse::<usize>()
            .map_err(|_| Error::format(path, format!("line {line}: invalid frame `{frame_text}`")))?;
        rows.push(PoseRow {
            frame,
            timestamp: float(cols[1], "timestamp")?,
            pose: Pose2::new(float(cols[2], "x")?, float(cols[3], "y")?, float(cols[4], "theta")?),
            status: status_col.and_then(|c| record.get(c)).map(|s| s.trim().to_string()),
        });
    }
    if rows.windows(2).any(|w| !(w[1].timestamp > w[0].timestamp)) {
        return Err(Error::format(path, "timestamps must be strictly increasing"));
    }
    Ok(rows)
}

fn mask_name(index: usize) -> String {
    format!("{index:06}.pgm")
}

fn feature_name(index: usize) -> String {
    format!("{index:06}.csv")
}

/// Writes a complete simulated dataset. Output bytes depend only on the
/// inputs.
pub fn generate_dataset(
    world: &World,
    spec: &TrajectorySpec,
    wheelbase: f64,
    sensor: &SensorConfig,
    noise: &NoiseConfig,
    max_frames: Option<usize>,
    dir: &Path,
) -> Result<usize> {
    let mut seq = simulate_sequence(spec, wheelbase, noise)?;
    if let Some(n) = max_frames {
        seq.truth.truncate(n);
        seq.odometry.truncate(n);
    }
    for sub in ["masks", "features"] {
        let p = dir.join(sub);
        std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    let calib = Calibration {
        scale_m_per_px: sensor.scale,
        image_size_px: sensor.size_px,
        wheelbase_m: wheelbase,
        frame_rate_hz: spec.frame_rate,
    };
    let calib_path = dir.join("calib.txt");
    std::fs::write(&calib_path, calib.to_text()).map_err(|e| Error::io(&calib_path, e))?;
    for (k, (t, pose)) in seq.truth.iter().enumerate() {
        let (mask, features) = render_frame(world, pose, *t, sensor, noise, k as u64)?;
        write_pgm(&mask, &dir.join("masks").join(mask_name(k)))?;
        write_feature_csv(&dir.join("features").join(feature_name(k)), &features.features, &mask)?;
    }
    let rows = |samples: Vec<(f64, Pose2)>| -> Vec<PoseRow> {
        samples
            .into_iter()
            .enumerate()
            .map(|(frame, (timestamp, pose))| PoseRow {
                frame,
                timestamp,
                pose,
                status: None,
            })
            .collect()
    };
    write_pose_csv(
        &dir.join("odometry.csv"),
        &rows(seq.odometry.iter().map(|o| (o.timestamp, o.pose)).collect()),
        false,
    )?;
    write_pose_csv(&dir.join("groundtruth.csv"), &rows(seq.truth.clone()), false)?;
    Ok(seq.truth.len())
}

/// Read access to a dataset directory.
#[derive(Debug, Clone)]
pub struct Dataset {
    root: PathBuf,
    pub calibration: Calibration,
    pub odometry: Vec<OdomSample>,
}

impl Dataset {
    pub fn open(root: &Path) -> Result<Self> {
        let calib_path = root.join("calib.txt");
        let text = std::fs::read_to_string(&calib_path).map_err(|e| Error::io(&calib_path, e))?;
        let calibration = Calibration::parse(&text, &calib_path)?;
        let odo_path = root.join("odometry.csv");
        let rows = read_pose_csv(&odo_path)?;
        for (i, r) in rows.iter().enumerate() {
            if r.frame != i {
                return Err(Error::format(&odo_path, format!("expected frame {i}, found {}", r.frame)));
            }
        }
        Ok(Self {
            root: root.to_path_buf(),
            calibration,
            odometry: rows.iter().map(|r| OdomSample::new(r.timestamp, r.pose)).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.odometry.len()
    }

    pub fn is_empty(&self) -> bool {
        self.odometry.is_empty()
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn mask_path(&self, index: usize) -> PathBuf {
        self.root.join("masks").join(mask_name(index))
    }

    pub fn features_path(&self, index: usize) -> PathBuf {
        self.root.join("features").join(feature_name(index))
    }

    /// Loads the mask and features of one frame.
    pub fn load_frame(&self, index: usize) -> Result<(FreeSpaceMask, FeatureFrame, OdomSample)> {
        let odom = *self
            .odometry
            .get(index)
            .ok_or_else(|| Error::InvalidParameter(format!("frame {index} out of range")))?;
        let mask = read_pgm(&self.mask_path(index), self.calibration.scale_m_per_px)?;
        if mask.width() != self.calibration.image_size_px {
            return Err(Error::format(
                self.mask_path(index),
                format!("expected {0}x{0} image", self.calibration.image_size_px),
            ));
        }
        let features = read_feature_csv(&self.features_path(index), odom.timestamp, &mask)?;
        Ok((mask, features, odom))
    }

    pub fn ground_truth(&self) -> Result<Vec<PoseRow>> {
        read_pose_csv(&self.root.join("groundtruth.csv"))
    }
}
