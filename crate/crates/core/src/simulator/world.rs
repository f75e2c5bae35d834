use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::feature_matcher::Descriptor;
use crate::geometry::Point2;

/// Convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon {
    vertices: Vec<Point2>,
}

fn cross(o: &Point2, a: &Point2, b: &Point2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

impl ConvexPolygon {
    /// Accepts either orientation; rejects non-convex or degenerate input.
    pub fn new(mut vertices: Vec<Point2>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::InvalidParameter("polygon needs at least 3 vertices".into()));
        }
        let area: f64 = (0..n)
            .map(|i| {
                let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                a.x * b.y - a.y * b.x
            })
            .sum();
        if area.abs() < 1e-12 {
            return Err(Error::InvalidParameter("polygon has zero area".into()));
        }
        if area < 0.0 {
            vertices.reverse();
        }
        for i in 0..n {
            if cross(&vertices[i], &vertices[(i + 1) % n], &vertices[(i + 2) % n]) < 0.0 {
                return Err(Error::InvalidParameter("polygon is not convex".into()));
            }
        }
        Ok(Self { vertices })
    }

    /// Rectangle with the given center, half sizes and heading.
    pub fn rectangle(center: Point2, half_x: f64, half_y: f64, heading: f64) -> Result<Self> {
        let (s, c) = heading.sin_cos();
        let corner = |dx: f64, dy: f64| Point2::new(center.x + c * dx - s * dy, center.y + s * dx + c * dy);
        Self::new(vec![
            corner(-half_x, -half_y),
            corner(half_x, -half_y),
            corner(half_x, half_y),
            corner(-half_x, half_y),
        ])
    }

    /// Axis-aligned box from its corner coordinates.
    pub fn axis_box(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Self::new(vec![
            Point2::new(x0, y0),
            Point2::new(x1, y0),
            Point2::new(x1, y1),
            Point2::new(x0, y1),
        ])
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    fn edges(&self) -> impl Iterator<Item = (&Point2, &Point2)> {
        let n = self.vertices.len();
        (0..n).map(move |i| (&self.vertices[i], &self.vertices[(i + 1) % n]))
    }

    /// Closed containment test.
    pub fn contains(&self, p: &Point2) -> bool {
        self.edges().all(|(a, b)| cross(a, b, p) >= 0.0)
    }

    /// Smallest `t >= 0` with `origin + t * dir` on the polygon boundary.
    pub fn ray_hit(&self, origin: &Point2, dir: &nalgebra::Vector2<f64>) -> Option<f64> {
        let mut best: Option<f64> = None;
        for (a, b) in self.edges() {
            let e = b - a;
            let denom = dir.x * e.y - dir.y * e.x;
            if denom.abs() < 1e-15 {
                continue;
            }
            let w = a - origin;
            let t = (w.x * e.y - w.y * e.x) / denom;
            let u = (w.x * dir.y - w.y * dir.x) / denom;
            if t >= 0.0 && (0.0..=1.0).contains(&u) && best.is_none_or(|b| t < b) {
                best = Some(t);
            }
        }
        best
    }

    pub(crate) fn bounding_radius(&self, center: &Point2) -> f64 {
        self.vertices
            .iter()
            .map(|v| (v - center).norm())
            .fold(0.0, f64::max)
    }

    /// Shadow of this polygon as seen from `viewer`, or `None` when the
    /// viewer is inside.
    pub(crate) fn shadow(&self, viewer: &Point2) -> Option<Shadow> {
        let n = self.vertices.len();
        let visible: Vec<bool> = self
            .edges()
            .map(|(a, b)| cross(a, b, viewer) < 0.0)
            .collect();
        let first = (0..n).find(|&i| visible[i] && !visible[(i + n - 1) % n])?;
        let mut edges = Vec::new();
        let mut i = first;
        while visible[i] {
            edges.push((self.vertices[i], self.vertices[(i + 1) % n]));
            i = (i + 1) % n;
            if i == first {
                break;
            }
        }
        let left = self.vertices[first];
        let right = self.vertices[i];
        Some(Shadow {
            viewer: *viewer,
            left,
            right,
            edges,
        })
    }
}

/// Region hidden behind a convex polygon: inside the wedge spanned by its
/// silhouette vertices and on the inner side of every visible edge.
#[derive(Debug, Clone)]
pub(crate) struct Shadow {
    viewer: Point2,
    left: Point2,
    right: Point2,
    edges: Vec<(Point2, Point2)>,
}

impl Shadow {
    pub(crate) fn covers(&self, p: &Point2) -> bool {
        cross(&self.viewer, &self.right, p) >= 0.0
            && cross(&self.viewer, p, &self.left) >= 0.0
            && self.edges.iter().all(|(a, b)| cross(a, b, p) >= 0.0)
    }
}

/// Axis-aligned world rectangle; everything outside counts as obstacle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min: Point2,
    pub max: Point2,
}

impl Bounds {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        if !(x1 > x0 && y1 > y0) {
            return Err(Error::InvalidParameter("empty world bounds".into()));
        }
        Ok(Self {
            min: Point2::new(x0, y0),
            max: Point2::new(x1, y1),
        })
    }

    pub fn contains(&self, p: &Point2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn area(&self) -> f64 {
        (self.max.x - self.min.x) * (self.max.y - self.min.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Landmark {
    pub id: u64,
    pub position: Point2,
    pub descriptor: Descriptor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub bounds: Bounds,
    pub obstacles: Vec<ConvexPolygon>,
    pub landmarks: Vec<Landmark>,
}

impl World {
    pub fn new(bounds: Bounds) -> Self {
        Self {
            bounds,
            obstacles: Vec::new(),
            landmarks: Vec::new(),
        }
    }

    pub fn with_obstacle(mut self, polygon: ConvexPolygon) -> Self {
        self.obstacles.push(polygon);
        self
    }

    /// True when `p` is inside the bounds and outside every obstacle.
    pub fn is_free(&self, p: &Point2) -> bool {
        self.bounds.contains(p) && !self.obstacles.iter().any(|o| o.contains(p))
    }

    /// Scatters landmarks uniformly over `region` at `density` per square
    /// meter of free space, with random descriptors. Ids continue after
    /// the existing landmarks.
    pub fn scatter_landmarks(&mut self, region: &Bounds, density: f64, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let attempts = (region.area() * density).round() as usize;
        let mut next_id = self.landmarks.iter().map(|l| l.id + 1).max().unwrap_or(0);
        for _ in 0..attempts {
            let p = Point2::new(
                rng.random_range(region.min.x..region.max.x),
                rng.random_range(region.min.y..region.max.y),
            );
            let descriptor = Descriptor(rng.random());
            if self.is_free(&p) {
                self.landmarks.push(Landmark {
                    id: next_id,
                    position: p,
                    descriptor,
                });
                next_id += 1;
            }
        }
    }

    /// Nearest obstacle or bounds hit along a ray from `origin`.
    pub fn first_hit(&self, origin: &Point2, dir: &nalgebra::Vector2<f64>) -> Option<f64> {
        let mut best = bounds_exit(&self.bounds, origin, dir);
        for o in &self.obstacles {
            if let Some(t) = o.ray_hit(origin, dir) {
                best = Some(best.map_or(t, |b: f64| b.min(t)));
            }
        }
        best
    }
}

fn bounds_exit(b: &Bounds, origin: &Point2, dir: &nalgebra::Vector2<f64>) -> Option<f64> {
    let axis = |o: f64, d: f64, lo: f64, hi: f64| {
        if d > 0.0 {
            (hi - o) / d
        } else if d < 0.0 {
            (lo - o) / d
        } else {
            f64::INFINITY
        }
    };
    let t = axis(origin.x, dir.x, b.min.x, b.max.x).min(axis(origin.y, dir.y, b.min.y, b.max.y));
    (t.is_finite() && t >= 0.0).then_some(t)
}
