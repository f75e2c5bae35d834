//! Moore-neighborhood border following on the free side of the
//! free/obstacle boundary.

use crate::error::{Error, Result};

use super::FreeSpaceMask;

/// Ordered boundary pixels `(row, col)`; consecutive pixels are 8-connected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contour {
    pub pixels: Vec<(usize, usize)>,
}

impl Contour {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
}

// clockwise with rows growing downwards: E, SE, S, SW, W, NW, N, NE
const DIRS: [(isize, isize); 8] = [
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
];

fn dir_index(dr: isize, dc: isize) -> usize {
    DIRS.iter()
        .position(|&d| d == (dr, dc))
        .expect("unit step between ring neighbours")
}

/// True if the pixel is FREE and has an OBSTACLE 4-neighbor inside the image.
pub fn is_border_pixel(mask: &FreeSpaceMask, row: usize, col: usize) -> bool {
    border_side(mask, row, col).is_some()
}

/// Direction index of the first OBSTACLE 4-neighbor of a FREE pixel.
fn border_side(mask: &FreeSpaceMask, row: usize, col: usize) -> Option<usize> {
    if !mask.is_free(row, col) {
        return None;
    }
    let (h, w) = (mask.height() as isize, mask.width() as isize);
    [0usize, 2, 4, 6].into_iter().find(|&d| {
        let (r, c) = (row as isize + DIRS[d].0, col as isize + DIRS[d].1);
        r >= 0 && c >= 0 && r < h && c < w && !mask.is_free(r as usize, c as usize)
    })
}

struct Tracer<'a> {
    mask: &'a FreeSpaceMask,
    /// per-pixel bitset of backtrack directions seen in the current trace
    states: Vec<u8>,
    touched: Vec<usize>,
}

impl<'a> Tracer<'a> {
    fn free_at(&self, r: isize, c: isize) -> bool {
        r >= 0
            && c >= 0
            && r < self.mask.height() as isize
            && c < self.mask.width() as isize
            && self.mask.is_free(r as usize, c as usize)
    }

    /// Follows the border from `start` keeping the background pixel in
    /// direction `back` on the outside. Stops when a (pixel, backtrack) state
    /// repeats.
    fn trace(&mut self, start: (usize, usize), back: usize) -> Vec<(usize, usize)> {
        let w = self.mask.width();
        let mut cur = (start.0 as isize, start.1 as isize);
        let mut back = back;
        let mut path = vec![start];
        self.mark(start.0 * w + start.1, back);
        loop {
            let next_dir = (1..=8)
                .map(|i| (back + i) % 8)
                .find(|&d| self.free_at(cur.0 + DIRS[d].0, cur.1 + DIRS[d].1));
            let Some(d) = next_dir else { break };
            let next = (cur.0 + DIRS[d].0, cur.1 + DIRS[d].1);
            let prev = DIRS[(d + 7) % 8];
            let bpos = (cur.0 + prev.0, cur.1 + prev.1);
            back = dir_index(bpos.0 - next.0, bpos.1 - next.1);
            cur = next;
            let idx = cur.0 as usize * w + cur.1 as usize;
            if !self.mark(idx, back) {
                break;
            }
            path.push((cur.0 as usize, cur.1 as usize));
        }
        for i in self.touched.drain(..) {
            self.states[i] = 0;
        }
        path
    }

    /// Records a state, returning false if it was already present.
    fn mark(&mut self, idx: usize, back: usize) -> bool {
        let bit = 1u8 << back;
        if self.states[idx] & bit != 0 {
            return false;
        }
        if self.states[idx] == 0 {
            self.touched.push(idx);
        }
        self.states[idx] |= bit;
        true
    }
}

fn adjacent8(a: (usize, usize), b: (usize, usize)) -> bool {
    a != b && a.0.abs_diff(b.0) <= 1 && a.1.abs_diff(b.1) <= 1
}

/// Extracts the free-side boundary of the obstacle set as 8-connected
/// pixel chains. Pixels along the image edge are not boundary pixels unless
/// they touch an obstacle.
pub fn extract_contours(mask: &FreeSpaceMask) -> Result<Vec<Contour>> {
    let (cr, cc) = mask.center_pixel();
    if !mask.is_free(cr, cc) {
        return Err(Error::CenterNotFree { row: cr, col: cc });
    }
    let (w, h) = (mask.width(), mask.height());
    let mut tracer = Tracer {
        mask,
        states: vec![0u8; w * h],
        touched: Vec::new(),
    };
    let mut visited = vec![false; w * h];
    let mut contours = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if visited[r * w + c] {
                continue;
            }
            let Some(side) = border_side(mask, r, c) else {
                continue;
            };
            let path = tracer.trace((r, c), side);
            let mut chain: Vec<(usize, usize)> = Vec::new();
            for p in path {
                if !is_border_pixel(mask, p.0, p.1) {
                    continue;
                }
                if let Some(&last) = chain.last() {
                    if last == p {
                        continue;
                    }
                    if !adjacent8(last, p) {
                        contours.push(Contour {
                            pixels: std::mem::take(&mut chain),
                        });
                    }
                }
                visited[p.0 * w + p.1] = true;
                chain.push(p);
            }
            if !chain.is_empty() {
                contours.push(Contour { pixels: chain });
            }
        }
    }
    Ok(contours)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn exhaustive_border(mask: &FreeSpaceMask) -> BTreeSet<(usize, usize)> {
        let n = mask.width() as isize;
        let mut set = BTreeSet::new();
        for r in 0..n {
            for c in 0..n {
                if !mask.is_free(r as usize, c as usize) {
                    continue;
                }
                let touches = [(0, 1), (1, 0), (0, -1), (-1, 0)].iter().any(|(dr, dc)| {
                    let (nr, nc) = (r + dr, c + dc);
                    nr >= 0 && nc >= 0 && nr < n && nc < n && !mask.is_free(nr as usize, nc as usize)
                });
                if touches {
                    set.insert((r as usize, c as usize));
                }
            }
        }
        set
    }

    fn block_mask(n: usize, r0: usize, c0: usize, size: usize) -> FreeSpaceMask {
        let mut m = FreeSpaceMask::all_free(n, 0.1).unwrap();
        for r in r0..r0 + size {
            for c in c0..c0 + size {
                m.set_free(r, c, false);
            }
        }
        m
    }

    fn assert_chains_connected(contours: &[Contour]) {
        for contour in contours {
            assert!(!contour.is_empty());
            for pair in contour.pixels.windows(2) {
                assert!(adjacent8(pair[0], pair[1]), "{:?}", pair);
            }
        }
    }

    fn union(contours: &[Contour]) -> BTreeSet<(usize, usize)> {
        contours.iter().flat_map(|c| c.pixels.iter().copied()).collect()
    }

    #[test]
    fn all_free_has_no_contours() {
        let m = FreeSpaceMask::all_free(20, 0.1).unwrap();
        assert!(extract_contours(&m).unwrap().is_empty());
    }

    #[test]
    fn interior_block_gives_single_closed_ring() {
        let m = block_mask(20, 3, 4, 3);
        let contours = extract_contours(&m).unwrap();
        assert_eq!(contours.len(), 1);
        assert_chains_connected(&contours);
        let oracle = exhaustive_border(&m);
        assert_eq!(oracle.len(), 12);
        assert_eq!(union(&contours), oracle);
        let ring = &contours[0].pixels;
        assert!(adjacent8(ring[0], *ring.last().unwrap()));
    }

    #[test]
    fn block_on_image_edge_excludes_edge_side() {
        let m = block_mask(20, 0, 5, 3);
        let contours = extract_contours(&m).unwrap();
        assert_chains_connected(&contours);
        let oracle = exhaustive_border(&m);
        assert_eq!(oracle.len(), 9);
        assert!(oracle.iter().all(|&(r, _)| r <= 3));
        assert_eq!(union(&contours), oracle);
    }

    #[test]
    fn obstacle_center_is_rejected() {
        let m = block_mask(20, 9, 9, 3);
        assert!(matches!(extract_contours(&m), Err(Error::CenterNotFree { .. })));
    }

    #[test]
    fn isolated_free_pixel_is_a_contour() {
        let mut m = FreeSpaceMask::all_obstacle(9, 0.1).unwrap();
        m.set_free(4, 4, true);
        let contours = extract_contours(&m).unwrap();
        assert_eq!(contours, vec![Contour { pixels: vec![(4, 4)] }]);
    }

    #[test]
    fn random_masks_cover_exhaustive_border() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.random_range(3..30);
            let p = rng.random_range(0.2..0.8);
            let cells: Vec<bool> = (0..n * n).map(|_| rng.random_bool(p)).collect();
            let mut m = FreeSpaceMask::from_cells(n, n, 0.1, cells).unwrap();
            let (cr, cc) = m.center_pixel();
            m.set_free(cr, cc, true);
            let contours = extract_contours(&m).unwrap();
            assert_chains_connected(&contours);
            assert_eq!(union(&contours), exhaustive_border(&m));
        }
    }
}
