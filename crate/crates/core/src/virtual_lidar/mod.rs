//! Virtual LiDAR: turns a binary free-space mask into a 2D range scan.
//!
//! The pipeline opens the obstacle set, drops small obstacle components,
//! traces the free-side boundary and keeps the nearest boundary pixel in
//! every angular bin.

mod contours;
mod mask;
mod morphology;
mod pgm;

use std::f64::consts::PI;

pub use contours::{extract_contours, is_border_pixel, Contour};
pub use mask::{FreeSpaceMask, DEFAULT_SCALE, DEFAULT_SIZE_PX};
pub use morphology::{morphological_open, remove_small_obstacles};
pub use pgm::{read_pgm, write_pgm, parse_pgm, encode_pgm};

use crate::error::{Error, Result};
use crate::geometry::Point2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirtualLidarParams {
    pub kernel_px: usize,
    pub min_area_px: usize,
    pub border_margin_px: usize,
    /// Radians.
    pub angle_increment: f64,
}

impl Default for VirtualLidarParams {
    fn default() -> Self {
        Self {
            kernel_px: 2,
            min_area_px: 50,
            border_margin_px: 10,
            angle_increment: 1f64.to_radians(),
        }
    }
}

/// One return of the virtual scan, in the vehicle frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPoint {
    pub bin: usize,
    pub point: Point2,
    pub range: f64,
    /// Source pixel `(row, col)` in the mask.
    pub pixel: (usize, usize),
}

/// Angularly binned range points, sorted by bin, at most one per bin.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualScan {
    pub angle_increment: f64,
    pub points: Vec<ScanPoint>,
}

impl VirtualScan {
    pub fn empty(angle_increment: f64) -> Self {
        Self {
            angle_increment,
            points: Vec::new(),
        }
    }

    /// Builds a scan from arbitrary vehicle-frame points with the same
    /// per-bin nearest rule as the mask pipeline. Pixel fields are zero.
    pub fn from_points(points: &[Point2], angle_increment: f64) -> Self {
        let bins = bin_count(angle_increment);
        let mut best: Vec<Option<ScanPoint>> = vec![None; bins];
        for p in points {
            let range = p.coords.norm();
            if !(range > 0.0) {
                continue;
            }
            let bin = angle_bin(p, angle_increment, bins);
            if best[bin].is_none_or(|b| range < b.range) {
                best[bin] = Some(ScanPoint {
                    bin,
                    point: *p,
                    range,
                    pixel: (0, 0),
                });
            }
        }
        Self {
            angle_increment,
            points: best.into_iter().flatten().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self) -> Vec<Point2> {
        self.points.iter().map(|p| p.point).collect()
    }
}

pub fn bin_count(angle_increment: f64) -> usize {
    (2.0 * PI / angle_increment).ceil() as usize
}

/// `floor((atan2(y, x) + pi) / increment)`, wrapped into the bin range.
pub fn angle_bin(p: &Point2, angle_increment: f64, bins: usize) -> usize {
    let raw = ((p.y.atan2(p.x) + PI) / angle_increment).floor() as usize;
    raw % bins
}

/// Converts contour pixels to a scan keeping, per bin, the pixel with the
/// smallest range; equal ranges resolve to the smaller row-major index.
pub fn contours_to_scan(
    contours: &[Contour],
    mask: &FreeSpaceMask,
    angle_increment: f64,
    border_margin_px: usize,
) -> Result<VirtualScan> {
    if !(angle_increment > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "angle increment must be positive, got {angle_increment}"
        )));
    }
    let (w, h) = (mask.width(), mask.height());
    let bins = bin_count(angle_increment);
    let mut best: Vec<Option<(f64, usize, ScanPoint)>> = vec![None; bins];
    for contour in contours {
        for &(r, c) in &contour.pixels {
            let edge = r.min(c).min(h - 1 - r).min(w - 1 - c);
            if edge < border_margin_px {
                continue;
            }
            let point = mask.pixel_to_vehicle(r, c);
            let range = point.coords.norm();
            let bin = angle_bin(&point, angle_increment, bins);
            let key = (range, r * w + c);
            let replace = match &best[bin] {
                None => true,
                Some((br, bi, _)) => key < (*br, *bi),
            };
            if replace {
                best[bin] = Some((
                    range,
                    key.1,
                    ScanPoint {
                        bin,
                        point,
                        range,
                        pixel: (r, c),
                    },
                ));
            }
        }
    }
    Ok(VirtualScan {
        angle_increment,
        points: best.into_iter().flatten().map(|(_, _, p)| p).collect(),
    })
}

/// Full pipeline. Returns the scan and the cleaned mask used for the
/// feature region of interest.
pub fn make_scan(
    mask: &FreeSpaceMask,
    params: &VirtualLidarParams,
) -> Result<(VirtualScan, FreeSpaceMask)> {
    let opened = morphological_open(mask, params.kernel_px)?;
    let cleaned = remove_small_obstacles(&opened, params.min_area_px);
    let contours = extract_contours(&cleaned)?;
    let scan = contours_to_scan(
        &contours,
        &cleaned,
        params.angle_increment,
        params.border_margin_px,
    )?;
    Ok((scan, cleaned))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_pixel_contour(r: usize, c: usize) -> Contour {
        Contour {
            pixels: vec![(r, c)],
        }
    }

    #[test]
    fn empty_contours_give_empty_scan() {
        let m = FreeSpaceMask::all_free(384, DEFAULT_SCALE).unwrap();
        let scan = contours_to_scan(&[], &m, 1f64.to_radians(), 10).unwrap();
        assert!(scan.is_empty());
    }

    #[test]
    fn forward_pixel_converts_to_meters() {
        let m = FreeSpaceMask::all_free(384, DEFAULT_SCALE).unwrap();
        // pixel row 142 is 50 px ahead of the vehicle origin at row 192
        let scan = contours_to_scan(&[single_pixel_contour(142, 192)], &m, 1f64.to_radians(), 10)
            .unwrap();
        assert_eq!(scan.len(), 1);
        let p = scan.points[0];
        let expected_x = 49.5 * DEFAULT_SCALE;
        assert!((p.point.x - expected_x).abs() < 1e-12);
        assert!((p.point.y + 0.5 * DEFAULT_SCALE).abs() < 1e-12);
        // brute-force bin membership check
        let angle = p.point.y.atan2(p.point.x) + PI;
        let inc = 1f64.to_radians();
        assert!(angle >= p.bin as f64 * inc && angle < (p.bin + 1) as f64 * inc);
        assert_eq!(p.bin, 179);
    }

    #[test]
    fn pixel_on_vehicle_axis_hits_exact_range() {
        // odd-sized mask: column 50 is centered on the x axis, row 0 is 50 px ahead
        let m = FreeSpaceMask::all_free(101, DEFAULT_SCALE).unwrap();
        let scan = contours_to_scan(&[single_pixel_contour(0, 50)], &m, 1f64.to_radians(), 0)
            .unwrap();
        assert_eq!(scan.len(), 1);
        let p = scan.points[0];
        assert!((p.point.x - 1.992).abs() < 1e-12);
        assert!(p.point.y.abs() < 1e-12);
        assert!((p.range - 1.992).abs() < 1e-12);
        assert_eq!(p.bin, 180);
    }

    #[test]
    fn nearer_pixel_wins_bin() {
        let m = FreeSpaceMask::all_free(384, DEFAULT_SCALE).unwrap();
        let contours = vec![single_pixel_contour(132, 192), single_pixel_contour(152, 192)];
        let scan = contours_to_scan(&contours, &m, 1f64.to_radians(), 10).unwrap();
        assert_eq!(scan.len(), 1);
        assert_eq!(scan.points[0].pixel, (152, 192));
    }

    #[test]
    fn border_margin_discards_edge_pixels() {
        let m = FreeSpaceMask::all_free(384, DEFAULT_SCALE).unwrap();
        let contours = vec![
            single_pixel_contour(9, 192),
            single_pixel_contour(10, 200),
            single_pixel_contour(200, 374),
        ];
        let scan = contours_to_scan(&contours, &m, 1f64.to_radians(), 10).unwrap();
        let pixels: Vec<_> = scan.points.iter().map(|p| p.pixel).collect();
        assert_eq!(pixels, vec![(10, 200)]);
    }

    #[test]
    fn rejects_non_positive_increment() {
        let m = FreeSpaceMask::all_free(16, 0.1).unwrap();
        assert!(contours_to_scan(&[], &m, 0.0, 0).is_err());
    }

    #[test]
    fn make_scan_all_free() {
        let m = FreeSpaceMask::all_free(64, 0.1).unwrap();
        let (scan, cleaned) = make_scan(&m, &VirtualLidarParams::default()).unwrap();
        assert!(scan.is_empty());
        assert_eq!(cleaned, m);
    }

    #[test]
    fn make_scan_square_obstacle_ahead() {
        let mut m = FreeSpaceMask::all_free(384, DEFAULT_SCALE).unwrap();
        // 20x20 block whose near face is row 159, centered across the axis
        for r in 140..160 {
            for c in 182..202 {
                m.set_free(r, c, false);
            }
        }
        // speckle removed by the opening
        m.set_free(250, 100, false);
        let (scan, cleaned) = make_scan(&m, &VirtualLidarParams::default()).unwrap();
        assert!(cleaned.is_free(250, 100));
        let nearest = scan
            .points
            .iter()
            .min_by(|a, b| a.range.partial_cmp(&b.range).unwrap())
            .unwrap();
        assert_eq!(nearest.pixel.0, 160);
        assert!((nearest.range - (192.0 - 160.0 - 0.5) * DEFAULT_SCALE).abs() < 0.03);
        assert!(scan.points.iter().all(|p| p.pixel != (249, 100) && p.pixel != (251, 100)));
    }

    #[test]
    fn from_points_keeps_nearest_per_bin() {
        let pts = [Point2::new(2.0, 0.01), Point2::new(1.0, 0.005), Point2::new(0.0, 3.0)];
        let scan = VirtualScan::from_points(&pts, 1f64.to_radians());
        assert_eq!(scan.len(), 2);
        assert!(scan.points.iter().any(|p| p.point == pts[1]));
    }
}
