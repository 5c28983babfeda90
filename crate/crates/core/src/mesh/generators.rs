use std::f64::consts::PI;

use nalgebra::Point2;

use super::Mesh;
use crate::error::{invalid, Result};

/// Triangulates the unit disk with concentric rings of vertices.
///
/// Ring `j` (of `m = round(n / 2π)` rings) has radius `j / m` and carries
/// `round(n j / m)` vertices, so the ring spacing matches the spacing of
/// the `n_boundary` vertices on the unit circle. Consecutive rings are
/// stitched by an angular sweep; odd rings are rotated by half a step.
pub fn build_disk_mesh(n_boundary: usize) -> Result<Mesh> {
    if n_boundary < 8 {
        return Err(invalid(format!("disk mesh needs at least 8 boundary vertices, got {n_boundary}")));
    }
    let n = n_boundary;
    let rings = ((n as f64 / (2.0 * PI)).round() as usize).max(1);

    let mut vertices = vec![Point2::origin()];
    // (first vertex index, count, angular offset) per ring, ring 0 = centre
    let mut ring_info = vec![(0usize, 1usize, 0.0f64)];
    for j in 1..=rings {
        let count = if j == rings {
            n
        } else {
            ((n as f64 * j as f64 / rings as f64).round() as usize).max(3)
        };
        let step = 2.0 * PI / count as f64;
        let offset = if j % 2 == 1 && j != rings { 0.5 * step } else { 0.0 };
        let radius = j as f64 / rings as f64;
        let first = vertices.len();
        for k in 0..count {
            let theta = offset + k as f64 * step;
            let p = if j == rings {
                Point2::new(theta.cos(), theta.sin())
            } else {
                Point2::new(radius * theta.cos(), radius * theta.sin())
            };
            vertices.push(p);
        }
        ring_info.push((first, count, offset));
    }

    let mut triangles = Vec::new();
    let (first1, count1, _) = ring_info[1];
    for k in 0..count1 {
        triangles.push([0, first1 + k, first1 + (k + 1) % count1]);
    }
    for j in 1..rings {
        let (fi, ni, oi) = ring_info[j];
        let (fo, no, oo) = ring_info[j + 1];
        let ang_i = |k: i64| oi + k as f64 * 2.0 * PI / ni as f64;
        let ang_o = |k: i64| oo + k as f64 * 2.0 * PI / no as f64;
        let idx_i = |k: i64| fi + k.rem_euclid(ni as i64) as usize;
        let idx_o = |k: i64| fo + k.rem_euclid(no as i64) as usize;
        // Both sweeps start at angle >= 0; the ring starting later begins
        // from its last vertex, unwrapped below zero.
        let mut ci: i64 = if oi > oo { -1 } else { 0 };
        let mut co: i64 = if oo > oi { -1 } else { 0 };
        let end_i = ci + ni as i64;
        let end_o = co + no as i64;
        while ci < end_i || co < end_o {
            let advance_inner = if ci == end_i {
                false
            } else if co == end_o {
                true
            } else {
                ang_i(ci + 1) < ang_o(co + 1)
            };
            if advance_inner {
                triangles.push([idx_i(ci), idx_o(co), idx_i(ci + 1)]);
                ci += 1;
            } else {
                triangles.push([idx_i(ci), idx_o(co), idx_o(co + 1)]);
                co += 1;
            }
        }
    }

    let (fb, nb, _) = ring_info[rings];
    let boundary = (0..nb).map(|k| (fb + k, fb + (k + 1) % nb, 1)).collect();
    let regions = vec![0; triangles.len()];
    Mesh::from_parts(vertices, triangles, regions, Some(boundary))
}

/// Structured triangulation of `[0, x_max] x [0, y_max]` with `nx * ny`
/// vertices, each cell cut along its lower-left to upper-right diagonal.
///
/// Boundary labels: 1 bottom, 2 right, 3 top, 4 left.
pub fn build_rect_mesh(nx: usize, ny: usize, x_max: f64, y_max: f64) -> Result<Mesh> {
    if nx < 2 || ny < 2 {
        return Err(invalid(format!("rectangle mesh needs nx, ny >= 2, got {nx} x {ny}")));
    }
    if !(x_max > 0.0 && y_max > 0.0) || !x_max.is_finite() || !y_max.is_finite() {
        return Err(invalid(format!("rectangle extents must be positive, got {x_max} x {y_max}")));
    }
    let id = |i: usize, j: usize| j * nx + i;
    let mut vertices = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            vertices.push(Point2::new(
                x_max * i as f64 / (nx - 1) as f64,
                y_max * j as f64 / (ny - 1) as f64,
            ));
        }
    }
    let mut triangles = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let mut boundary = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx - 1 {
        boundary.push((id(i, 0), id(i + 1, 0), 1));
    }
    for j in 0..ny - 1 {
        boundary.push((id(nx - 1, j), id(nx - 1, j + 1), 2));
    }
    for i in (0..nx - 1).rev() {
        boundary.push((id(i + 1, ny - 1), id(i, ny - 1), 3));
    }
    for j in (0..ny - 1).rev() {
        boundary.push((id(0, j + 1), id(0, j), 4));
    }
    let regions = vec![0; triangles.len()];
    Mesh::from_parts(vertices, triangles, regions, Some(boundary))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_invariants(mesh: &Mesh) {
        for t in 0..mesh.triangle_count() {
            let [a, b, c] = mesh.triangle_points(t);
            assert!(super::super::signed_area(&a, &b, &c) > 0.0, "triangle {t}");
        }
        let poly = mesh.boundary_polygon_area();
        assert!((mesh.total_area() - poly).abs() <= 1e-12 * poly);
    }

    #[test]
    fn disk_vertex_counts_track_reference_meshes() {
        for (n, reference) in [(100usize, 926.0), (200, 3601.0), (400, 14071.0)] {
            let mesh = build_disk_mesh(n).unwrap();
            check_invariants(&mesh);
            let nv = mesh.vertex_count() as f64;
            assert!((nv - reference).abs() <= 0.25 * reference, "n={n}: {nv} vertices");
            assert_eq!(mesh.boundary_edges().len(), n);
        }
    }

    #[test]
    fn coarsest_disk() {
        let mesh = build_disk_mesh(8).unwrap();
        check_invariants(&mesh);
        assert!(mesh.vertex_count() >= 9);
        let polygon = 0.5 * 8.0 * (2.0 * PI / 8.0).sin();
        assert!((mesh.total_area() - polygon).abs() < 1e-12);
    }

    #[test]
    fn disk_rejects_tiny_boundary() {
        assert!(build_disk_mesh(7).is_err());
    }

    #[test]
    fn disk_triangles_are_well_shaped() {
        let mesh = build_disk_mesh(200).unwrap();
        let h = 2.0 * PI / 200.0;
        assert!(mesh.h_max() < 2.5 * h, "h_max = {}", mesh.h_max());
        for t in 0..mesh.triangle_count() {
            let [a, b, c] = mesh.triangle_points(t);
            let longest = [(a - b).norm(), (b - c).norm(), (c - a).norm()]
                .into_iter()
                .fold(0.0, f64::max);
            // area relative to an equilateral triangle on the longest edge
            let ratio = mesh.area(t) / (longest * longest * 3f64.sqrt() / 4.0);
            assert!(ratio > 0.2, "triangle {t} ratio {ratio}");
        }
    }

    #[test]
    fn rect_counts() {
        let m = build_rect_mesh(2, 2, 1.0, 1.0).unwrap();
        assert_eq!((m.vertex_count(), m.triangle_count()), (4, 2));
        assert!((m.total_area() - 1.0).abs() < 1e-15);
        let m = build_rect_mesh(3, 2, 1.0, 1.0).unwrap();
        assert_eq!((m.vertex_count(), m.triangle_count()), (6, 4));
        let m = build_rect_mesh(150, 150, 200.0, 2.0).unwrap();
        assert_eq!((m.vertex_count(), m.triangle_count()), (22500, 2 * 149 * 149));
        check_invariants(&m);
    }

    #[test]
    fn rect_rejects_bad_extents() {
        assert!(build_rect_mesh(3, 3, 0.0, 1.0).is_err());
        assert!(build_rect_mesh(3, 3, 1.0, -1.0).is_err());
        assert!(build_rect_mesh(1, 3, 1.0, 1.0).is_err());
    }
}
