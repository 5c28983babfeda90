//! Triangulations of polygonal domains.
//!
//! A [`Mesh`] stores counterclockwise triangles together with the
//! edge adjacency needed for point location: `neighbors[t][k]` is the
//! triangle across the edge of `t` opposite its local vertex `k`, or
//! `None` when that edge lies on the boundary.

mod generators;
mod io;
mod locate;

use std::collections::HashMap;

use nalgebra::{Point2, Vector2};

use crate::error::{Error, Result};

pub use generators::{build_disk_mesh, build_rect_mesh};
pub use io::{load_mesh, read_mesh, save_mesh, write_mesh};
pub use locate::{PointLocator, TriLocation, BARY_TOLERANCE};

/// A boundary edge, oriented so that the domain lies on its left.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub label: i32,
    /// Triangle owning this edge.
    pub triangle: usize,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point2<f64>>,
    triangles: Vec<[usize; 3]>,
    regions: Vec<i32>,
    neighbors: Vec<[Option<usize>; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    areas: Vec<f64>,
    vertex_tri_offsets: Vec<usize>,
    vertex_tri_list: Vec<usize>,
    convex: bool,
}

impl PartialEq for Mesh {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices
            && self.triangles == other.triangles
            && self.regions == other.regions
            && self.boundary_edges == other.boundary_edges
    }
}

pub(crate) fn cross(a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

pub(crate) fn signed_area(p: &Point2<f64>, q: &Point2<f64>, r: &Point2<f64>) -> f64 {
    0.5 * cross(q - p, r - p)
}

impl Mesh {
    /// Builds a mesh from raw parts.
    ///
    /// Clockwise triangles are reoriented. When `boundary` is `None` the
    /// boundary edges are derived from the topology and labelled `1`;
    /// otherwise the supplied list must match the topological boundary
    /// exactly (orientation is normalized).
    pub fn from_parts(
        vertices: Vec<Point2<f64>>,
        mut triangles: Vec<[usize; 3]>,
        regions: Vec<i32>,
        boundary: Option<Vec<(usize, usize, i32)>>,
    ) -> Result<Self> {
        let nv = vertices.len();
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("mesh has no triangles".into()));
        }
        if regions.len() != triangles.len() {
            return Err(Error::InvalidMesh("one region label per triangle required".into()));
        }

        let scale = bounding_box_diameter(&vertices);
        let mut areas = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter_mut().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidMesh(format!("triangle {t} references a missing vertex")));
            }
            let a = signed_area(&vertices[tri[0]], &vertices[tri[1]], &vertices[tri[2]]);
            if a.abs() <= 1e-14 * scale * scale {
                return Err(Error::InvalidMesh(format!("triangle {t} has zero area")));
            }
            if a < 0.0 {
                tri.swap(1, 2);
            }
            areas.push(a.abs());
        }

        let mut neighbors = vec![[None; 3]; triangles.len()];
        let mut open: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        let mut closed = std::collections::HashSet::new();
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                let key = (a.min(b), a.max(b));
                if closed.contains(&key) {
                    return Err(Error::InvalidMesh(format!(
                        "edge ({a}, {b}) is shared by more than two triangles"
                    )));
                }
                match open.remove(&key) {
                    Some((s, j)) => {
                        neighbors[s][j] = Some(t);
                        neighbors[t][k] = Some(s);
                        closed.insert(key);
                    }
                    None => {
                        open.insert(key, (t, k));
                    }
                }
            }
        }

        let owner_edge = |key: (usize, usize)| -> Option<(usize, [usize; 2])> {
            open.get(&key).map(|&(t, k)| {
                let tri = triangles[t];
                (t, [tri[(k + 1) % 3], tri[(k + 2) % 3]])
            })
        };

        let boundary_edges = match boundary {
            Some(list) => {
                if list.len() != open.len() {
                    return Err(Error::InvalidMesh(format!(
                        "{} boundary edges supplied but the triangulation has {}",
                        list.len(),
                        open.len()
                    )));
                }
                let mut out = Vec::with_capacity(list.len());
                let mut seen = std::collections::HashSet::new();
                for (a, b, label) in list {
                    let key = (a.min(b), a.max(b));
                    let (t, verts) = owner_edge(key).ok_or_else(|| {
                        Error::InvalidMesh(format!("({a}, {b}) is not a boundary edge"))
                    })?;
                    if !seen.insert(key) {
                        return Err(Error::InvalidMesh(format!("boundary edge ({a}, {b}) repeated")));
                    }
                    out.push(BoundaryEdge { vertices: verts, label, triangle: t });
                }
                out
            }
            None => {
                let mut out: Vec<BoundaryEdge> = open
                    .values()
                    .map(|&(t, k)| {
                        let tri = triangles[t];
                        BoundaryEdge {
                            vertices: [tri[(k + 1) % 3], tri[(k + 2) % 3]],
                            label: 1,
                            triangle: t,
                        }
                    })
                    .collect();
                out.sort_by_key(|e| (e.triangle, e.vertices));
                out
            }
        };

        let mut counts = vec![0usize; nv + 1];
        for tri in &triangles {
            for &v in tri {
                counts[v + 1] += 1;
            }
        }
        for i in 0..nv {
            counts[i + 1] += counts[i];
        }
        let vertex_tri_offsets = counts;
        let mut fill = vertex_tri_offsets.clone();
        let mut vertex_tri_list = vec![0; vertex_tri_offsets[nv]];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                vertex_tri_list[fill[v]] = t;
                fill[v] += 1;
            }
        }

        let mut mesh = Mesh {
            vertices,
            triangles,
            regions,
            neighbors,
            boundary_edges,
            areas,
            vertex_tri_offsets,
            vertex_tri_list,
            convex: false,
        };
        mesh.convex = mesh.compute_convexity(scale);
        Ok(mesh)
    }

    fn compute_convexity(&self, scale: f64) -> bool {
        let tol = 1e-12 * scale * scale;
        self.boundary_edges.iter().all(|e| {
            let p = self.vertices[e.vertices[0]];
            let q = self.vertices[e.vertices[1]];
            self.boundary_edges
                .iter()
                .all(|f| signed_area(&p, &q, &self.vertices[f.vertices[0]]) >= -tol)
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertices(&self) -> &[Point2<f64>] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point2<f64> {
        self.vertices[v]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, t: usize) -> [usize; 3] {
        self.triangles[t]
    }

    pub fn regions(&self) -> &[i32] {
        &self.regions
    }

    pub fn triangle_points(&self, t: usize) -> [Point2<f64>; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn neighbors(&self, t: usize) -> [Option<usize>; 3] {
        self.neighbors[t]
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn area(&self, t: usize) -> f64 {
        self.areas[t]
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Whether the boundary polygon is convex.
    pub fn is_convex(&self) -> bool {
        self.convex
    }

    pub fn triangles_around(&self, v: usize) -> &[usize] {
        &self.vertex_tri_list[self.vertex_tri_offsets[v]..self.vertex_tri_offsets[v + 1]]
    }

    /// Sorted, deduplicated list of vertices lying on the boundary.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        let mut vs: Vec<usize> = self
            .boundary_edges
            .iter()
            .flat_map(|e| e.vertices)
            .collect();
        vs.sort_unstable();
        vs.dedup();
        vs
    }

    /// Area enclosed by the boundary edges, via the shoelace formula.
    pub fn boundary_polygon_area(&self) -> f64 {
        self.boundary_edges
            .iter()
            .map(|e| {
                let p = self.vertices[e.vertices[0]];
                let q = self.vertices[e.vertices[1]];
                0.5 * (p.x * q.y - q.x * p.y)
            })
            .sum()
    }

    /// Longest edge length.
    pub fn h_max(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|tri| {
                (0..3).map(move |k| (tri[k], tri[(k + 1) % 3]))
            })
            .map(|(a, b)| (self.vertices[a] - self.vertices[b]).norm())
            .fold(0.0, f64::max)
    }

    /// Gradients of the three barycentric coordinates on triangle `t`.
    pub fn barycentric_gradients(&self, t: usize) -> [Vector2<f64>; 3] {
        let [p0, p1, p2] = self.triangle_points(t);
        let det = cross(p1 - p0, p2 - p0);
        let perp = |e: Vector2<f64>| Vector2::new(-e.y, e.x) / det;
        // grad of lambda_k is the inward normal of the opposite edge scaled by its length.
        [perp(p2 - p1), perp(p0 - p2), perp(p1 - p0)]
    }

    /// Barycentric coordinates of `p` with respect to triangle `t`.
    pub fn barycentric(&self, t: usize, p: &Point2<f64>) -> [f64; 3] {
        let [p0, p1, p2] = self.triangle_points(t);
        let det = cross(p1 - p0, p2 - p0);
        let l1 = cross(p - p0, p2 - p0) / det;
        let l2 = cross(p1 - p0, p - p0) / det;
        [1.0 - l1 - l2, l1, l2]
    }

    /// Physical point with barycentric coordinates `bary` in triangle `t`.
    pub fn point_at(&self, t: usize, bary: &[f64; 3]) -> Point2<f64> {
        let [p0, p1, p2] = self.triangle_points(t);
        Point2::from(p0.coords * bary[0] + p1.coords * bary[1] + p2.coords * bary[2])
    }

    /// Nearest point of the boundary polygon to `p`, with the index of the
    /// boundary edge it lies on.
    pub fn nearest_boundary_point(&self, p: &Point2<f64>) -> (Point2<f64>, usize) {
        let mut best = (*p, 0usize, f64::INFINITY);
        for (i, e) in self.boundary_edges.iter().enumerate() {
            let a = self.vertices[e.vertices[0]];
            let b = self.vertices[e.vertices[1]];
            let ab = b - a;
            let s = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
            let q = a + ab * s;
            let d = (p - q).norm_squared();
            if d < best.2 {
                best = (q, i, d);
            }
        }
        (best.0, best.1)
    }

    /// Returns `point` if it lies in the mesh, otherwise the nearest point
    /// on the boundary polygon.
    pub fn project_to_domain(&self, point: &Point2<f64>) -> Point2<f64> {
        if self.locate_point(point, None).is_some() {
            *point
        } else {
            self.nearest_boundary_point(point).0
        }
    }
}

fn bounding_box_diameter(vertices: &[Point2<f64>]) -> f64 {
    let mut lo = Vector2::repeat(f64::INFINITY);
    let mut hi = Vector2::repeat(f64::NEG_INFINITY);
    for p in vertices {
        lo = lo.inf(&p.coords);
        hi = hi.sup(&p.coords);
    }
    (hi - lo).norm().max(f64::MIN_POSITIVE)
}
