//! Continuous piecewise-linear (P1) finite elements.

use std::io::Write;
use std::sync::Arc;

use nalgebra::Point2;
use rayon::prelude::*;

use crate::error::Result;
use crate::linalg::SparseMatrix;
use crate::mesh::{Mesh, TriLocation};
use crate::quadrature::{map_point, QuadratureRule};

/// A P1 function: one coefficient per mesh vertex.
#[derive(Clone, Debug)]
pub struct FieldP1 {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl PartialEq for FieldP1 {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh) && self.values == other.values
    }
}

/// `sqrt(|v|_0^2 + nu dt |grad v|_0^2)` with its two parts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NuDtNorm {
    pub l2_squared: f64,
    pub h1_squared: f64,
    pub nu_dt: f64,
    pub value: f64,
}

impl FieldP1 {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), mesh.vertex_count(), "one coefficient per vertex");
        Self { mesh, values }
    }

    pub fn constant(mesh: Arc<Mesh>, c: f64) -> Self {
        let n = mesh.vertex_count();
        Self::new(mesh, vec![c; n])
    }

    /// Samples `f` at every vertex.
    pub fn interpolate<F: Fn(Point2<f64>) -> f64>(mesh: Arc<Mesh>, f: F) -> Self {
        let values = mesh.vertices().iter().map(|&p| f(p)).collect();
        Self { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn evaluate(&self, loc: &TriLocation) -> f64 {
        let tri = self.mesh.triangle(loc.triangle);
        (0..3).map(|k| self.values[tri[k]] * loc.barycentric[k]).sum()
    }

    /// Value at a physical point, `None` outside the mesh.
    pub fn evaluate_at(&self, p: &Point2<f64>) -> Option<f64> {
        self.mesh.locate_point(p, None).map(|loc| self.evaluate(&loc))
    }

    /// `int u`, i.e. `1^T M u`.
    pub fn integral(&self) -> f64 {
        self.mesh
            .triangles()
            .iter()
            .zip(self.mesh.areas())
            .map(|(tri, area)| area / 3.0 * tri.iter().map(|&v| self.values[v]).sum::<f64>())
            .sum()
    }

    pub fn min_coeff(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_coeff(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_squared().sqrt()
    }

    fn l2_squared(&self) -> f64 {
        // element mass |T|/12 (1 + delta_ij): u^T M_T u = |T|/12 (sum u_i^2 + (sum u_i)^2)
        self.mesh
            .triangles()
            .iter()
            .zip(self.mesh.areas())
            .map(|(tri, area)| {
                let u = tri.map(|v| self.values[v]);
                let s: f64 = u.iter().sum();
                let s2: f64 = u.iter().map(|x| x * x).sum();
                area / 12.0 * (s2 + s * s)
            })
            .sum()
    }

    pub fn h1_seminorm(&self) -> f64 {
        self.h1_squared().sqrt()
    }

    fn h1_squared(&self) -> f64 {
        (0..self.mesh.triangle_count())
            .map(|t| self.gradient(t).norm_squared() * self.mesh.area(t))
            .sum()
    }

    /// Constant gradient on triangle `t`.
    pub fn gradient(&self, t: usize) -> nalgebra::Vector2<f64> {
        let grads = self.mesh.barycentric_gradients(t);
        let tri = self.mesh.triangle(t);
        (0..3).map(|k| grads[k] * self.values[tri[k]]).sum()
    }

    pub fn nu_dt_norm(&self, nu: f64, dt: f64) -> NuDtNorm {
        let l2_squared = self.l2_squared();
        let h1_squared = self.h1_squared();
        let nu_dt = nu * dt;
        NuDtNorm {
            l2_squared,
            h1_squared,
            nu_dt,
            value: (l2_squared + nu_dt * h1_squared).sqrt(),
        }
    }

    /// `sqrt(int (u_h - f)^2)` computed with `rule` on every triangle.
    pub fn l2_error<F>(&self, f: F, rule: &QuadratureRule) -> f64
    where
        F: Fn(Point2<f64>) -> f64 + Sync,
    {
        let mesh = &self.mesh;
        (0..mesh.triangle_count())
            .into_par_iter()
            .map(|t| {
                let pts = mesh.triangle_points(t);
                let tri = mesh.triangle(t);
                let local: f64 = rule
                    .iter()
                    .map(|(b, w)| {
                        let uh: f64 = (0..3).map(|k| self.values[tri[k]] * b[k]).sum();
                        let d = uh - f(map_point(&pts, b));
                        w * d * d
                    })
                    .sum();
                local * mesh.area(t)
            })
            .collect::<Vec<f64>>()
            .into_iter()
            .sum::<f64>()
            .sqrt()
    }

    /// CSV dump `vertex_index,x,y,value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "vertex_index,x,y,value")?;
        for (i, (p, v)) in self.mesh.vertices().iter().zip(&self.values).enumerate() {
            writeln!(w, "{i},{:?},{:?},{:?}", p.x, p.y, v)?;
        }
        Ok(())
    }
}

/// Assembles `sum_T A_T` from per-triangle 3x3 blocks.
///
/// Element blocks are computed in parallel and scattered in triangle
/// order, so the result does not depend on the thread count.
pub fn assemble<F>(mesh: &Mesh, element: F) -> SparseMatrix
where
    F: Fn(usize) -> [[f64; 3]; 3] + Sync,
{
    let blocks: Vec<[[f64; 3]; 3]> = (0..mesh.triangle_count()).into_par_iter().map(&element).collect();
    let triplets = blocks.iter().enumerate().flat_map(|(t, block)| {
        let tri = mesh.triangle(t);
        (0..3).flat_map(move |i| (0..3).map(move |j| (tri[i], tri[j], block[i][j])))
    });
    SparseMatrix::from_triplets(mesh.vertex_count(), triplets.collect::<Vec<_>>())
        .expect("mesh indices are in range")
}

pub fn element_mass(area: f64) -> [[f64; 3]; 3] {
    let mut m = [[area / 12.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = area / 6.0;
    }
    m
}

pub fn element_stiffness(mesh: &Mesh, t: usize) -> [[f64; 3]; 3] {
    let g = mesh.barycentric_gradients(t);
    let area = mesh.area(t);
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = area * g[i].dot(&g[j]);
        }
    }
    k
}

pub fn assemble_mass(mesh: &Mesh) -> SparseMatrix {
    assemble(mesh, |t| element_mass(mesh.area(t)))
}

pub fn assemble_stiffness(mesh: &Mesh) -> SparseMatrix {
    assemble(mesh, |t| element_stiffness(mesh, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_disk_mesh, build_rect_mesh};
    use crate::quadrature::nine_point_rule;

    fn square(n: usize) -> Arc<Mesh> {
        Arc::new(build_rect_mesh(n, n, 1.0, 1.0).unwrap())
    }

    #[test]
    fn reference_triangle_mass_matrix() {
        let verts = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)];
        let mesh = Mesh::from_parts(verts, vec![[0, 1, 2]], vec![0], None).unwrap();
        let m = assemble_mass(&mesh);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 2.0 / 24.0 } else { 1.0 / 24.0 };
                assert!((m.get(i, j) - want).abs() < 1e-16);
            }
        }
    }

    #[test]
    fn mass_total_is_area_and_stiffness_kills_constants() {
        let mesh = build_disk_mesh(50).unwrap();
        let m = assemble_mass(&mesh);
        let k = assemble_stiffness(&mesh);
        let ones = vec![1.0; mesh.vertex_count()];
        let area = mesh.boundary_polygon_area();
        assert!((m.quadratic_form(&ones, &ones) - area).abs() < 1e-12 * area);
        assert!(k.mul_vec(&ones).iter().all(|x| x.abs() < 1e-13));
        assert!(m.asymmetry() <= 1e-15 && k.asymmetry() <= 1e-15);
    }

    #[test]
    fn interpolation_reproduces_linears() {
        let mesh = square(7);
        let f = |p: Point2<f64>| 0.3 + 2.0 * p.x - 1.5 * p.y;
        let u = FieldP1::interpolate(mesh.clone(), f);
        for p in [Point2::new(0.123, 0.456), Point2::new(0.9, 0.05), Point2::new(0.5, 0.5)] {
            assert!((u.evaluate_at(&p).unwrap() - f(p)).abs() < 1e-14);
        }
        assert!(u.l2_error(f, &nine_point_rule()) < 1e-13);
    }

    #[test]
    fn evaluate_combines_vertex_values() {
        let mesh = square(2);
        let u = FieldP1::new(mesh.clone(), vec![0.0, 1.0, 2.0, 5.0]);
        let tri = mesh.triangle(0);
        let loc = TriLocation::new(0, [1.0, 0.0, 0.0]);
        assert_eq!(u.evaluate(&loc), u.values()[tri[0]]);
        let loc = TriLocation::new(0, [1.0 / 3.0; 3]);
        let mean = tri.iter().map(|&v| u.values()[v]).sum::<f64>() / 3.0;
        assert!((u.evaluate(&loc) - mean).abs() < 1e-15);
        let loc = TriLocation::new(0, [0.5, 0.5, 0.0]);
        assert!((u.evaluate(&loc) - 0.5 * (u.values()[tri[0]] + u.values()[tri[1]])).abs() < 1e-15);
    }

    #[test]
    fn norms() {
        let mesh = Arc::new(build_disk_mesh(40).unwrap());
        let c = FieldP1::constant(mesh.clone(), 2.5);
        let area = mesh.boundary_polygon_area();
        assert!((c.l2_norm() - 2.5 * area.sqrt()).abs() < 1e-12);
        assert!((c.integral() - 2.5 * area).abs() < 1e-12);

        let sq = square(5);
        let x = FieldP1::interpolate(sq, |p| p.x);
        assert!((x.h1_seminorm() - 1.0).abs() < 1e-14);
        let n0 = x.nu_dt_norm(0.0, 0.1);
        assert!((n0.value - x.l2_norm()).abs() < 1e-15);
        let n = x.nu_dt_norm(0.3, 0.1);
        assert!((n.value.powi(2) - (x.l2_norm().powi(2) + 0.03 * x.h1_seminorm().powi(2))).abs() < 1e-14);
    }

    #[test]
    fn norms_agree_with_assembled_matrices() {
        let mesh = Arc::new(build_disk_mesh(30).unwrap());
        let u = FieldP1::interpolate(mesh.clone(), |p| (3.0 * p.x).sin() + p.y * p.y);
        let m = assemble_mass(&mesh);
        let k = assemble_stiffness(&mesh);
        let v = u.values();
        assert!((u.l2_norm().powi(2) - m.quadratic_form(v, v)).abs() < 1e-13);
        assert!((u.h1_seminorm().powi(2) - k.quadratic_form(v, v)).abs() < 1e-12);
        let ones = vec![1.0; v.len()];
        assert!((u.integral() - m.quadratic_form(&ones, v)).abs() < 1e-14);
    }

    #[test]
    fn extrema_and_zero_error() {
        let mesh = square(3);
        let mut u = FieldP1::constant(mesh.clone(), 0.0);
        assert_eq!(u.l2_error(|_| 0.0, &nine_point_rule()), 0.0);
        u.values_mut()[4] = -0.25;
        u.values_mut()[2] = 3.0;
        assert_eq!(u.min_coeff(), -0.25);
        assert_eq!(u.max_coeff(), 3.0);
    }

    #[test]
    fn csv_header_and_rows() {
        let u = FieldP1::constant(square(2), 1.5);
        let mut out = Vec::new();
        u.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "vertex_index,x,y,value");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[4], "3,1.0,1.0,1.5");
    }
}
