//! Cleanup of the OBSTACLE set: square opening and small-component removal.

use crate::error::{Error, Result};

use super::FreeSpaceMask;

/// Summed-area table with a zero first row and column.
fn integral(width: usize, height: usize, on: impl Fn(usize) -> bool) -> Vec<u32> {
    let stride = width + 1;
    let mut sums = vec![0u32; stride * (height + 1)];
    for r in 0..height {
        let mut row_sum = 0u32;
        for c in 0..width {
            row_sum += on(r * width + c) as u32;
            sums[(r + 1) * stride + c + 1] = sums[r * stride + c + 1] + row_sum;
        }
    }
    sums
}

fn box_sum(sums: &[u32], stride: usize, r0: usize, c0: usize, r1: usize, c1: usize) -> u32 {
    // inclusive-exclusive [r0, r1) x [c0, c1)
    sums[r1 * stride + c1] + sums[r0 * stride + c0] - sums[r0 * stride + c1] - sums[r1 * stride + c0]
}

/// Opening of the OBSTACLE set with a `kernel_px` square: an obstacle pixel
/// survives iff some `kernel_px x kernel_px` window inside the image covers
/// it and is entirely obstacle.
pub fn morphological_open(mask: &FreeSpaceMask, kernel_px: usize) -> Result<FreeSpaceMask> {
    let (w, h) = (mask.width(), mask.height());
    if kernel_px == 0 {
        return Err(Error::InvalidParameter("kernel_px must be >= 1".into()));
    }
    if kernel_px > w || kernel_px > h {
        return Err(Error::InvalidParameter(format!(
            "kernel {kernel_px} px larger than {w}x{h} image"
        )));
    }
    let k = kernel_px;
    let cells = mask.cells();
    let stride = w + 1;

    // erosion: window anchored at its top-left corner
    let obstacle_sums = integral(w, h, |i| !cells[i]);
    let (fw, fh) = (w - k + 1, h - k + 1);
    let full = (k * k) as u32;
    let mut fits = vec![false; w * h];
    for r in 0..fh {
        for c in 0..fw {
            fits[r * w + c] = box_sum(&obstacle_sums, stride, r, c, r + k, c + k) == full;
        }
    }

    // dilation with the reflected element
    let fit_sums = integral(w, h, |i| fits[i]);
    let mut out = mask.clone();
    let dst = out.cells_mut();
    for r in 0..h {
        let r0 = (r + 1).saturating_sub(k);
        for c in 0..w {
            let c0 = (c + 1).saturating_sub(k);
            dst[r * w + c] = box_sum(&fit_sums, stride, r0, c0, r + 1, c + 1) == 0;
        }
    }
    Ok(out)
}

pub(crate) const NEIGHBORS_8: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// Flips every 8-connected OBSTACLE component smaller than `min_area_px`
/// pixels to FREE.
pub fn remove_small_obstacles(mask: &FreeSpaceMask, min_area_px: usize) -> FreeSpaceMask {
    let mut out = mask.clone();
    if min_area_px == 0 {
        return out;
    }
    let (w, h) = (mask.width(), mask.height());
    let cells = mask.cells();
    let mut seen = vec![false; w * h];
    let mut stack = Vec::new();
    let mut component = Vec::new();
    for start in 0..w * h {
        if cells[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        component.clear();
        while let Some(i) = stack.pop() {
            component.push(i);
            let (r, c) = ((i / w) as isize, (i % w) as isize);
            for (dr, dc) in NEIGHBORS_8 {
                let (nr, nc) = (r + dr, c + dc);
                if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                    continue;
                }
                let j = nr as usize * w + nc as usize;
                if !cells[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        if component.len() < min_area_px {
            let dst = out.cells_mut();
            for &i in &component {
                dst[i] = true;
            }
        }
    }
    out
}
