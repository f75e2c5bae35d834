use crate::error::{Error, Result};
use crate::geometry::Point2;

/// Meters per pixel of the default 384 px surround-view footprint (15.3 m).
pub const DEFAULT_SCALE: f64 = 0.03984;
pub const DEFAULT_SIZE_PX: usize = 384;

/// Square binary free-space grid centered on the vehicle.
///
/// Row 0 is the image top (vehicle forward), column 0 the image left
/// (vehicle left). Pixel `(r, c)` has its center at
/// `x = (h/2 - r - 0.5) * scale`, `y = (w/2 - c - 0.5) * scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeSpaceMask {
    width: usize,
    height: usize,
    scale: f64,
    free: Vec<bool>,
}

impl FreeSpaceMask {
    pub fn all_free(size: usize, scale: f64) -> Result<Self> {
        Self::from_cells(size, size, scale, vec![true; size * size])
    }

    pub fn all_obstacle(size: usize, scale: f64) -> Result<Self> {
        Self::from_cells(size, size, scale, vec![false; size * size])
    }

    /// Builds a mask from row-major cells, `true` meaning FREE.
    pub fn from_cells(width: usize, height: usize, scale: f64, free: Vec<bool>) -> Result<Self> {
        if width != height {
            return Err(Error::InvalidParameter(format!(
                "mask must be square, got {width}x{height}"
            )));
        }
        if width == 0 {
            return Err(Error::InvalidParameter("mask must not be empty".into()));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "scale must be positive, got {scale}"
            )));
        }
        if free.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "expected {} cells, got {}",
                width * height,
                free.len()
            )));
        }
        Ok(Self {
            width,
            height,
            scale,
            free,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn cells(&self) -> &[bool] {
        &self.free
    }

    pub(crate) fn cells_mut(&mut self) -> &mut [bool] {
        &mut self.free
    }

    pub fn is_free(&self, row: usize, col: usize) -> bool {
        self.free[row * self.width + col]
    }

    pub fn set_free(&mut self, row: usize, col: usize, free: bool) {
        self.free[row * self.width + col] = free;
    }

    pub fn count_free(&self) -> usize {
        self.free.iter().filter(|&&f| f).count()
    }

    /// Same geometry, different scale.
    pub fn with_scale(&self, scale: f64) -> Result<Self> {
        Self::from_cells(self.width, self.height, scale, self.free.clone())
    }

    /// Vehicle-frame position of a pixel center.
    pub fn pixel_to_vehicle(&self, row: usize, col: usize) -> Point2 {
        Point2::new(
            (self.height as f64 / 2.0 - row as f64 - 0.5) * self.scale,
            (self.width as f64 / 2.0 - col as f64 - 0.5) * self.scale,
        )
    }

    /// Continuous image coordinates `(col, row)` of a vehicle-frame point.
    /// Pixel `(r, c)` covers `[c, c+1) x [r, r+1)`.
    pub fn vehicle_to_image(&self, p: &Point2) -> (f64, f64) {
        (
            self.width as f64 / 2.0 - p.y / self.scale,
            self.height as f64 / 2.0 - p.x / self.scale,
        )
    }

    pub fn image_to_vehicle(&self, col: f64, row: f64) -> Point2 {
        Point2::new(
            (self.height as f64 / 2.0 - row) * self.scale,
            (self.width as f64 / 2.0 - col) * self.scale,
        )
    }

    /// Pixel containing a vehicle-frame point, if inside the image.
    pub fn vehicle_to_pixel(&self, p: &Point2) -> Option<(usize, usize)> {
        let (u, v) = self.vehicle_to_image(p);
        let (col, row) = (u.floor(), v.floor());
        if !(col >= 0.0 && row >= 0.0 && col < self.width as f64 && row < self.height as f64) {
            return None;
        }
        Some((row as usize, col as usize))
    }

    /// Pixel containing the vehicle origin.
    pub fn center_pixel(&self) -> (usize, usize) {
        (self.height / 2, self.width / 2)
    }

    /// Half the metric side length of the footprint.
    pub fn half_extent(&self) -> f64 {
        self.width as f64 * self.scale / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pixel_mapping_round_trip() {
        let m = FreeSpaceMask::all_free(384, DEFAULT_SCALE).unwrap();
        let p = m.pixel_to_vehicle(0, 0);
        assert!((p.x - 191.5 * DEFAULT_SCALE).abs() < 1e-12);
        assert!((p.y - 191.5 * DEFAULT_SCALE).abs() < 1e-12);
        for (r, c) in [(0, 0), (191, 192), (383, 17), (100, 300)] {
            assert_eq!(m.vehicle_to_pixel(&m.pixel_to_vehicle(r, c)), Some((r, c)));
        }
        assert_eq!(m.vehicle_to_pixel(&Point2::origin()), Some(m.center_pixel()));
        assert_eq!(m.vehicle_to_pixel(&Point2::new(8.0, 0.0)), None);
    }

    #[test]
    fn rejects_non_square() {
        assert!(FreeSpaceMask::from_cells(4, 3, 0.1, vec![true; 12]).is_err());
        assert!(FreeSpaceMask::from_cells(4, 4, 0.0, vec![true; 16]).is_err());
    }
}
