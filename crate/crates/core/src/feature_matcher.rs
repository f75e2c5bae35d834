//! Ground-plane features with 256-bit binary descriptors, the free-space
//! region-of-interest filter, and the motion-prior direct matcher.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Point2, Pose2};
use crate::virtual_lidar::FreeSpaceMask;

/// 256-bit binary descriptor; word 0 holds the most significant bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Descriptor(pub [u64; 4]);

impl Descriptor {
    pub fn hamming(&self, other: &Descriptor) -> u32 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    /// Flips bit `i`, counting from the most significant bit.
    pub fn flip_bit(&mut self, i: usize) {
        self.0[i / 64] ^= 1u64 << (63 - i % 64);
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|w| format!("{w:016x}")).collect()
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        if s.len() != 64 || !s.bytes().all(|b| b.is_ascii_hexdigit()) {
            return None;
        }
        let mut words = [0u64; 4];
        for (i, w) in words.iter_mut().enumerate() {
            *w = u64::from_str_radix(&s[i * 16..(i + 1) * 16], 16).ok()?;
        }
        Some(Self(words))
    }
}

impl fmt::Display for Descriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feature {
    pub id: u64,
    /// Vehicle frame, meters, on the ground plane.
    pub position: Point2,
    pub descriptor: Descriptor,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureFrame {
    pub timestamp: f64,
    pub features: Vec<Feature>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureCorrespondence {
    pub current: Feature,
    pub keyframe: Feature,
    pub current_index: usize,
    pub keyframe_index: usize,
    pub descriptor_distance: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectMatchParams {
    /// Meters around the projected point.
    pub radius: f64,
    pub max_hamming: u32,
}

impl Default for DirectMatchParams {
    fn default() -> Self {
        Self {
            radius: 0.1,
            max_hamming: 64,
        }
    }
}

/// Keeps the features whose position falls on a FREE pixel of `mask`.
pub fn apply_roi(features: &[Feature], mask: &FreeSpaceMask) -> Vec<Feature> {
    features
        .iter()
        .filter(|f| {
            mask.vehicle_to_pixel(&f.position)
                .is_some_and(|(r, c)| mask.is_free(r, c))
        })
        .copied()
        .collect()
}

/// Uniform grid over keyframe feature positions with cell size `cell`.
struct Grid {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl Grid {
    fn new(points: impl Iterator<Item = Point2>, cell: f64) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.enumerate() {
            buckets.entry(Self::key(&p, cell)).or_default().push(i);
        }
        Self { cell, buckets }
    }

    fn key(p: &Point2, cell: f64) -> (i64, i64) {
        ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
    }

    fn around(&self, p: &Point2) -> impl Iterator<Item = usize> + '_ {
        let (kx, ky) = Self::key(p, self.cell);
        (-1..=1).flat_map(move |dx| {
            (-1..=1).flat_map(move |dy| {
                self.buckets
                    .get(&(kx + dx, ky + dy))
                    .into_iter()
                    .flatten()
                    .copied()
            })
        })
    }
}

/// Projects current features into the keyframe with `predicted_pose` and
/// assigns pairs greedily by ascending `(hamming, current id, keyframe id)`.
pub fn direct_match(
    current: &FeatureFrame,
    keyframe: &FeatureFrame,
    predicted_pose: &Pose2,
    params: &DirectMatchParams,
) -> Result<Vec<FeatureCorrespondence>> {
    if !(params.radius > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "match radius must be positive, got {}",
            params.radius
        )));
    }
    let grid = Grid::new(keyframe.features.iter().map(|f| f.position), params.radius);
    let mut candidates = Vec::new();
    for (ci, cf) in current.features.iter().enumerate() {
        let projected = predicted_pose.transform_point(&cf.position);
        for ki in grid.around(&projected) {
            let kf = &keyframe.features[ki];
            if (kf.position - projected).norm() > params.radius {
                continue;
            }
            let hamming = cf.descriptor.hamming(&kf.descriptor);
            if hamming <= params.max_hamming {
                candidates.push((hamming, cf.id, kf.id, ci, ki));
            }
        }
    }
    candidates.sort_unstable();

    let mut used_current = vec![false; current.features.len()];
    let mut used_keyframe = vec![false; keyframe.features.len()];
    let mut matches = Vec::new();
    for (hamming, _, _, ci, ki) in candidates {
        if used_current[ci] || used_keyframe[ki] {
            continue;
        }
        used_current[ci] = true;
        used_keyframe[ki] = true;
        matches.push(FeatureCorrespondence {
            current: current.features[ci],
            keyframe: keyframe.features[ki],
            current_index: ci,
            keyframe_index: ki,
            descriptor_distance: hamming,
        });
    }
    Ok(matches)
}

/// Writes the per-frame feature CSV (`id,x_px,y_px,descriptor`).
/// `x_px` is the column coordinate and `y_px` the row coordinate in the
/// mask image; pixel `(r, c)` spans `[c, c+1) x [r, r+1)`.
pub fn write_feature_csv(path: &Path, features: &[Feature], mask: &FreeSpaceMask) -> Result<()> {
    let mut out = Vec::with_capacity(features.len() * 100 + 32);
    out.extend_from_slice(b"id,x_px,y_px,descriptor\n");
    for f in features {
        let (u, v) = mask.vehicle_to_image(&f.position);
        writeln!(out, "{},{},{},{}", f.id, u, v, f.descriptor).expect("write to vec");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a feature CSV, converting pixel coordinates with the geometry of
/// `mask`.
pub fn read_feature_csv(path: &Path, timestamp: f64, mask: &FreeSpaceMask) -> Result<FeatureFrame> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::format(path, e.to_string()))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::format(path, format!("missing column `{name}`")))
    };
    let (id_col, x_col, y_col, d_col) = (
        column("id")?,
        column("x_px")?,
        column("y_px")?,
        column("descriptor")?,
    );
    let mut features = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        let bad = |what: &str| Error::format(path, format!("line {}: invalid {what}", line + 2));
        let id: u64 = field(id_col).parse().map_err(|_| bad("id"))?;
        let u: f64 = field(x_col).parse().map_err(|_| bad("x_px"))?;
        let v: f64 = field(y_col).parse().map_err(|_| bad("y_px"))?;
        let descriptor = Descriptor::from_hex(field(d_col)).ok_or_else(|| bad("descriptor"))?;
        features.push(Feature {
            id,
            position: mask.image_to_vehicle(u, v),
            descriptor,
        });
    }
    Ok(FeatureFrame {
        timestamp,
        features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn desc(seed: u64) -> Descriptor {
        let mut x = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
        let mut words = [0u64; 4];
        for w in &mut words {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            *w = x;
        }
        Descriptor(words)
    }

    fn with_flips(d: Descriptor, n: usize) -> Descriptor {
        let mut d = d;
        for i in 0..n {
            d.flip_bit(i * 5);
        }
        d
    }

    fn feature(id: u64, x: f64, y: f64, d: Descriptor) -> Feature {
        Feature {
            id,
            position: Point2::new(x, y),
            descriptor: d,
        }
    }

    /// Exhaustive pairwise matcher: tries every pair, same greedy rule.
    fn exhaustive_match(
        current: &FeatureFrame,
        keyframe: &FeatureFrame,
        pose: &Pose2,
        radius: f64,
        max_hamming: u32,
    ) -> Vec<(u64, u64)> {
        let mut all = Vec::new();
        for c in &current.features {
            for k in &keyframe.features {
                let d = (pose.transform_point(&c.position) - k.position).norm();
                let h = c.descriptor.hamming(&k.descriptor);
                if d <= radius && h <= max_hamming {
                    all.push((h, c.id, k.id));
                }
            }
        }
        all.sort();
        let mut out = Vec::new();
        let (mut uc, mut uk) = (Vec::new(), Vec::new());
        for (_, c, k) in all {
            if !uc.contains(&c) && !uk.contains(&k) {
                uc.push(c);
                uk.push(k);
                out.push((c, k));
            }
        }
        out.sort();
        out
    }

    #[test]
    fn descriptor_hex_round_trip() {
        let d = desc(42);
        let hex = d.to_hex();
        assert_eq!(hex.len(), 64);
        assert_eq!(hex, hex.to_lowercase());
        assert_eq!(Descriptor::from_hex(&hex), Some(d));
        let mut one = Descriptor::default();
        one.flip_bit(0);
        assert!(one.to_hex().starts_with('8'));
        assert!(Descriptor::from_hex("abc").is_none());
    }

    #[test]
    fn roi_examples() {
        let mut mask = FreeSpaceMask::all_free(10, 0.1).unwrap();
        let feats = vec![feature(1, 0.22, 0.13, desc(1)), feature(2, -0.31, 0.4, desc(2))];
        assert_eq!(apply_roi(&feats, &mask), feats);

        let (r, c) = mask.vehicle_to_pixel(&feats[0].position).unwrap();
        mask.set_free(r, c, false);
        assert_eq!(apply_roi(&feats, &mask), vec![feats[1]]);

        // x = 0.2 lies on the boundary between rows 2 and 3; it belongs to row 3
        let mut mask = FreeSpaceMask::all_free(10, 0.1).unwrap();
        let on_edge = feature(3, 0.2, 0.05, desc(3));
        let (r, c) = mask.vehicle_to_pixel(&on_edge.position).unwrap();
        assert_eq!((r, c), (3, 4));
        mask.set_free(2, 4, false);
        assert_eq!(apply_roi(&[on_edge], &mask).len(), 1);
        mask.set_free(3, 4, false);
        assert!(apply_roi(&[on_edge], &mask).is_empty());
    }

    #[test]
    fn identical_frames_match_themselves() {
        let frame = FeatureFrame {
            timestamp: 0.0,
            features: (0..50)
                .map(|i| feature(i, (i % 7) as f64 * 0.5, (i / 7) as f64 * 0.5, desc(i)))
                .collect(),
        };
        let m = direct_match(&frame, &frame, &Pose2::IDENTITY, &DirectMatchParams::default())
            .unwrap();
        assert_eq!(m.len(), 50);
        assert!(m.iter().all(|c| c.current.id == c.keyframe.id && c.descriptor_distance == 0));
    }

    #[test]
    fn displaced_counterpart_is_unmatched() {
        let cur = FeatureFrame {
            timestamp: 0.0,
            features: vec![feature(1, 1.0, 0.0, desc(1))],
        };
        let kf = FeatureFrame {
            timestamp: 0.0,
            features: vec![feature(1, 1.15, 0.0, desc(1))],
        };
        let m = direct_match(&cur, &kf, &Pose2::IDENTITY, &DirectMatchParams::default()).unwrap();
        assert!(m.is_empty());
    }

    #[test]
    fn lower_hamming_candidate_wins() {
        let base = desc(9);
        let cur = FeatureFrame {
            timestamp: 0.0,
            features: vec![feature(1, 1.0, 0.0, base)],
        };
        let kf = FeatureFrame {
            timestamp: 0.0,
            features: vec![
                feature(10, 1.05, 0.0, with_flips(base, 40)),
                feature(11, 0.96, 0.02, with_flips(base, 4)),
            ],
        };
        let m = direct_match(&cur, &kf, &Pose2::IDENTITY, &DirectMatchParams::default()).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].keyframe.id, 11);
        assert_eq!(m[0].descriptor_distance, 4);
        assert_eq!(
            exhaustive_match(&cur, &kf, &Pose2::IDENTITY, 0.1, 64),
            vec![(1, 11)]
        );
    }

    #[test]
    fn feature_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let mask = FreeSpaceMask::all_free(384, 0.03984).unwrap();
        let feats = vec![feature(7, 1.25, -3.5, desc(7)), feature(8, -6.0, 2.0, desc(8))];
        write_feature_csv(&path, &feats, &mask).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("id,x_px,y_px,descriptor\n"));
        let back = read_feature_csv(&path, 1.5, &mask).unwrap();
        assert_eq!(back.timestamp, 1.5);
        for (a, b) in feats.iter().zip(&back.features) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.descriptor, b.descriptor);
            assert!((a.position - b.position).norm() < 1e-12);
        }
    }

    #[test]
    fn feature_csv_missing_column_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        std::fs::write(&path, "id,x_px,descriptor\n").unwrap();
        let mask = FreeSpaceMask::all_free(8, 0.1).unwrap();
        let err = read_feature_csv(&path, 0.0, &mask).unwrap_err().to_string();
        assert!(err.contains("y_px"), "{err}");
    }

    fn frames() -> impl Strategy<Value = (FeatureFrame, FeatureFrame)> {
        let feat = |id_base: u64| {
            (0u64..40, -2.0..2.0f64, -2.0..2.0f64, 0u64..6, 0usize..80)
                .prop_map(move |(id, x, y, d, flips)| {
                    feature(id + id_base, x, y, with_flips(desc(d), flips % 50))
                })
        };
        (
            proptest::collection::vec(feat(0), 0..40),
            proptest::collection::vec(feat(1000), 0..40),
        )
            .prop_map(|(mut a, mut b)| {
                a.sort_by_key(|f| f.id);
                a.dedup_by_key(|f| f.id);
                b.sort_by_key(|f| f.id);
                b.dedup_by_key(|f| f.id);
                (
                    FeatureFrame { timestamp: 0.0, features: a },
                    FeatureFrame { timestamp: 0.0, features: b },
                )
            })
    }

    proptest! {
        #[test]
        fn matcher_properties((cur, kf) in frames(), radius in 0.05..0.8f64, max_h in 0u32..80, tx in -0.3..0.3f64) {
            let pose = Pose2::new(tx, 0.1, 0.05);
            let params = DirectMatchParams { radius, max_hamming: max_h };
            let m = direct_match(&cur, &kf, &pose, &params).unwrap();

            let mut kf_ids: Vec<_> = m.iter().map(|c| c.keyframe.id).collect();
            kf_ids.sort();
            kf_ids.dedup();
            prop_assert_eq!(kf_ids.len(), m.len());
            for c in &m {
                prop_assert!((pose.transform_point(&c.current.position) - c.keyframe.position).norm() <= radius);
                prop_assert!(c.descriptor_distance <= max_h);
            }

            let mut pairs: Vec<_> = m.iter().map(|c| (c.current.id, c.keyframe.id)).collect();
            pairs.sort();
            prop_assert_eq!(&pairs, &exhaustive_match(&cur, &kf, &pose, radius, max_h));

            // ordering invariance
            let mut rc = cur.clone();
            rc.features.reverse();
            let mut rk = kf.clone();
            rk.features.reverse();
            let mut again: Vec<_> = direct_match(&rc, &rk, &pose, &params).unwrap()
                .iter().map(|c| (c.current.id, c.keyframe.id)).collect();
            again.sort();
            prop_assert_eq!(&again, &pairs);

            // monotone in both gates
            let tighter = DirectMatchParams { radius: radius * 0.5, max_hamming: max_h / 2 };
            prop_assert!(direct_match(&cur, &kf, &pose, &tighter).unwrap().len() <= m.len()
                || exhaustive_match(&cur, &kf, &pose, radius * 0.5, max_h / 2).len() <= m.len());
        }
    }
}
