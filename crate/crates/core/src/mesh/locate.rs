//! Point location by straight walking across triangle edges.

use nalgebra::Point2;

use super::Mesh;

/// A point is considered inside a triangle when none of its barycentric
/// coordinates falls below `-BARY_TOLERANCE`.
pub const BARY_TOLERANCE: f64 = 1e-12;

/// A triangle together with barycentric coordinates inside it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TriLocation {
    pub triangle: usize,
    pub barycentric: [f64; 3],
}

impl TriLocation {
    pub fn new(triangle: usize, barycentric: [f64; 3]) -> Self {
        Self { triangle, barycentric }
    }
}

fn inside(l: &[f64; 3]) -> bool {
    l.iter().all(|&x| x >= -BARY_TOLERANCE)
}

/// Clamp to [0, 1] and renormalize so the coordinates sum to one.
fn clamp_bary(l: [f64; 3]) -> [f64; 3] {
    let c = l.map(|x| x.clamp(0.0, 1.0));
    let s: f64 = c.iter().sum();
    c.map(|x| x / s)
}

impl Mesh {
    /// Locates `point`, starting the walk at `hint` (or triangle 0).
    ///
    /// Returns `None` when no triangle contains the point. Points on
    /// shared edges or vertices resolve to the lowest-indexed triangle
    /// containing them, so the answer does not depend on the hint.
    pub fn locate_point(&self, point: &Point2<f64>, hint: Option<usize>) -> Option<TriLocation> {
        let start = hint.filter(|&t| t < self.triangle_count()).unwrap_or(0);
        let found = match self.walk(point, start) {
            Walk::Found(t) => Some(t),
            Walk::Outside if self.is_convex() => None,
            _ => self.scan(point),
        }?;
        Some(self.resolve_tie(point, found))
    }

    /// Locates `point`, projecting it onto the boundary polygon first when
    /// it falls outside. The flag reports whether projection happened.
    pub fn locate_or_project(&self, point: &Point2<f64>, hint: Option<usize>) -> (TriLocation, bool) {
        if let Some(loc) = self.locate_point(point, hint) {
            return (loc, false);
        }
        let (q, e) = self.nearest_boundary_point(point);
        let owner = self.boundary_edges()[e].triangle;
        let loc = self.locate_point(&q, Some(owner)).unwrap_or_else(|| {
            TriLocation::new(owner, clamp_bary(self.barycentric(owner, &q)))
        });
        (loc, true)
    }

    fn walk(&self, point: &Point2<f64>, start: usize) -> Walk {
        let mut t = start;
        let cap = 4 * self.triangle_count();
        for _ in 0..cap {
            let l = self.barycentric(t, point);
            if inside(&l) {
                return Walk::Found(t);
            }
            let k = (0..3)
                .min_by(|&a, &b| l[a].total_cmp(&l[b]))
                .expect("three coordinates");
            match self.neighbors(t)[k] {
                Some(s) => t = s,
                None => return Walk::Outside,
            }
        }
        Walk::GaveUp
    }

    fn scan(&self, point: &Point2<f64>) -> Option<usize> {
        (0..self.triangle_count()).find(|&t| inside(&self.barycentric(t, point)))
    }

    fn resolve_tie(&self, point: &Point2<f64>, t: usize) -> TriLocation {
        let l = self.barycentric(t, point);
        let near_zero: Vec<usize> = (0..3).filter(|&k| l[k].abs() <= BARY_TOLERANCE).collect();
        let best = match near_zero.len() {
            0 => t,
            1 => match self.neighbors(t)[near_zero[0]] {
                Some(s) if s < t && inside(&self.barycentric(s, point)) => s,
                _ => t,
            },
            _ => {
                // on (or next to) a vertex: the one whose coordinate is not ~0
                let k = (0..3).find(|k| !near_zero.contains(k)).unwrap_or(0);
                let v = self.triangle(t)[k];
                self.triangles_around(v)
                    .iter()
                    .copied()
                    .filter(|&s| inside(&self.barycentric(s, point)))
                    .min()
                    .unwrap_or(t)
            }
        };
        TriLocation::new(best, clamp_bary(self.barycentric(best, point)))
    }
}

enum Walk {
    Found(usize),
    Outside,
    GaveUp,
}

/// Locator carrying its own "last found" triangle as the walk start.
///
/// Each thread should own its locator; the mesh itself stays shared
/// and immutable.
pub struct PointLocator<'a> {
    mesh: &'a Mesh,
    last: usize,
}

impl<'a> PointLocator<'a> {
    pub fn new(mesh: &'a Mesh) -> Self {
        Self { mesh, last: 0 }
    }

    pub fn locate(&mut self, point: &Point2<f64>) -> Option<TriLocation> {
        let loc = self.mesh.locate_point(point, Some(self.last))?;
        self.last = loc.triangle;
        Some(loc)
    }

    pub fn locate_or_project(&mut self, point: &Point2<f64>) -> (TriLocation, bool) {
        let (loc, projected) = self.mesh.locate_or_project(point, Some(self.last));
        self.last = loc.triangle;
        (loc, projected)
    }
}
