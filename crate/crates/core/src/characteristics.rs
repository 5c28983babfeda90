//! Velocity fields and the one-step characteristic tracer
//!
//! `eta(x) = x + a(x) dt + (sigma / 2) dt^2 (a . grad) a (x)`.
//!
//! Jacobians follow the convention `J[(i, j)] = d a_j / d x_i`, so the
//! convective acceleration `(a . grad) a` is `J^T a`. For the rotation
//! `a = (-y, x)`: `d_x a = (0, 1)`, `d_y a = (-1, 0)`, hence
//! `J = [[0, 1], [-1, 0]]` and `(a . grad) a = (-x, -y)`.

use nalgebra::{Matrix2, Point2, Vector2};
use rayon::prelude::*;

use crate::mesh::{Mesh, TriLocation};
use crate::quadrature::{map_point, QuadratureRule};

pub trait VelocityField: Sync {
    fn value(&self, p: &Point2<f64>) -> Vector2<f64>;

    /// `J[(i, j)] = d a_j / d x_i`.
    fn jacobian(&self, p: &Point2<f64>) -> Matrix2<f64>;

    /// `(a . grad) a`.
    fn convective_acceleration(&self, p: &Point2<f64>) -> Vector2<f64> {
        self.jacobian(p).transpose() * self.value(p)
    }

    /// Whether the field vanishes identically; lets schemes skip tracing.
    fn is_zero(&self) -> bool {
        false
    }
}

/// Rigid rotation `a(x, y) = (-y, x)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Rotation;

impl VelocityField for Rotation {
    fn value(&self, p: &Point2<f64>) -> Vector2<f64> {
        Vector2::new(-p.y, p.x)
    }

    fn jacobian(&self, _p: &Point2<f64>) -> Matrix2<f64> {
        Matrix2::new(0.0, 1.0, -1.0, 0.0)
    }
}

pub fn rotation_field() -> Rotation {
    Rotation
}

#[derive(Clone, Copy, Debug)]
pub struct Uniform(pub Vector2<f64>);

impl VelocityField for Uniform {
    fn value(&self, _p: &Point2<f64>) -> Vector2<f64> {
        self.0
    }

    fn jacobian(&self, _p: &Point2<f64>) -> Matrix2<f64> {
        Matrix2::zeros()
    }

    fn is_zero(&self) -> bool {
        self.0 == Vector2::zeros()
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Zero;

impl VelocityField for Zero {
    fn value(&self, _p: &Point2<f64>) -> Vector2<f64> {
        Vector2::zeros()
    }

    fn jacobian(&self, _p: &Point2<f64>) -> Matrix2<f64> {
        Matrix2::zeros()
    }

    fn is_zero(&self) -> bool {
        true
    }
}

/// Field given by a pair of closures (value, Jacobian).
pub struct FnField<V, J> {
    pub value: V,
    pub jacobian: J,
}

impl<V, J> VelocityField for FnField<V, J>
where
    V: Fn(&Point2<f64>) -> Vector2<f64> + Sync,
    J: Fn(&Point2<f64>) -> Matrix2<f64> + Sync,
{
    fn value(&self, p: &Point2<f64>) -> Vector2<f64> {
        (self.value)(p)
    }

    fn jacobian(&self, p: &Point2<f64>) -> Matrix2<f64> {
        (self.jacobian)(p)
    }
}

/// Central finite-difference Jacobian, in the `d a_j / d x_i` layout.
pub fn finite_difference_jacobian<F: VelocityField + ?Sized>(field: &F, p: &Point2<f64>, h: f64) -> Matrix2<f64> {
    let dx = (field.value(&Point2::new(p.x + h, p.y)) - field.value(&Point2::new(p.x - h, p.y))) / (2.0 * h);
    let dy = (field.value(&Point2::new(p.x, p.y + h)) - field.value(&Point2::new(p.x, p.y - h))) / (2.0 * h);
    Matrix2::new(dx.x, dx.y, dy.x, dy.y)
}

/// Tracer order switch: `First` drops the `dt^2` term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TracerOrder {
    First,
    #[default]
    Second,
}

impl TracerOrder {
    pub fn sigma(self) -> f64 {
        match self {
            TracerOrder::First => 0.0,
            TracerOrder::Second => 1.0,
        }
    }

    pub fn from_sigma(sigma: u8) -> Option<Self> {
        match sigma {
            0 => Some(TracerOrder::First),
            1 => Some(TracerOrder::Second),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// `x + a dt + (sigma/2) dt^2 (a . grad) a`.
pub fn trace_forward<F: VelocityField + ?Sized>(field: &F, x: &Point2<f64>, dt: f64, order: TracerOrder) -> Point2<f64> {
    trace(field, x, dt, order)
}

/// Same formula with `dt -> -dt`; the quadratic term keeps its sign.
pub fn trace_backward<F: VelocityField + ?Sized>(field: &F, x: &Point2<f64>, dt: f64, order: TracerOrder) -> Point2<f64> {
    trace(field, x, -dt, order)
}

fn trace<F: VelocityField + ?Sized>(field: &F, x: &Point2<f64>, dt: f64, order: TracerOrder) -> Point2<f64> {
    let a = field.value(x);
    let mut y = x + a * dt;
    if order == TracerOrder::Second {
        y += field.jacobian(x).transpose() * a * (0.5 * dt * dt);
    }
    y
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TracedNode {
    /// Quadrature node, located in its own triangle.
    pub source: TriLocation,
    /// Traced (and if needed projected) position.
    pub target: TriLocation,
    /// Quadrature weight times triangle area.
    pub weight: f64,
}

/// Every quadrature node of a mesh together with its traced image.
#[derive(Clone, Debug, PartialEq)]
pub struct TracedPoints {
    pub nodes: Vec<TracedNode>,
    pub projected: usize,
    pub direction: Direction,
}

impl TracedPoints {
    pub fn projected_fraction(&self) -> f64 {
        if self.nodes.is_empty() {
            0.0
        } else {
            self.projected as f64 / self.nodes.len() as f64
        }
    }

    pub fn total_weight(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight).sum()
    }
}

/// Traces every quadrature node of `rule` on every triangle.
///
/// Nodes leaving the domain are projected back onto the boundary polygon.
/// Triangles are processed in parallel; each walk starts from the
/// previous node's target (or the node's own triangle), and location is
/// hint-independent, so the result is deterministic.
pub fn build_traced_points<F: VelocityField + ?Sized>(
    mesh: &Mesh,
    field: &F,
    rule: &QuadratureRule,
    dt: f64,
    order: TracerOrder,
    direction: Direction,
) -> TracedPoints {
    let zero = field.is_zero();
    let per_triangle: Vec<(Vec<TracedNode>, usize)> = (0..mesh.triangle_count())
        .into_par_iter()
        .map(|t| {
            let pts = mesh.triangle_points(t);
            let area = mesh.area(t);
            let mut hint = t;
            let mut projected = 0;
            let nodes = rule
                .iter()
                .map(|(b, w)| {
                    let source = TriLocation::new(t, *b);
                    let target = if zero {
                        source
                    } else {
                        let xi = map_point(&pts, b);
                        let eta = match direction {
                            Direction::Forward => trace_forward(field, &xi, dt, order),
                            Direction::Backward => trace_backward(field, &xi, dt, order),
                        };
                        let (loc, was_projected) = mesh.locate_or_project(&eta, Some(hint));
                        projected += usize::from(was_projected);
                        hint = loc.triangle;
                        loc
                    };
                    TracedNode { source, target, weight: w * area }
                })
                .collect();
            (nodes, projected)
        })
        .collect();

    let projected = per_triangle.iter().map(|(_, p)| p).sum();
    let nodes = per_triangle.into_iter().flat_map(|(n, _)| n).collect();
    TracedPoints { nodes, projected, direction }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_disk_mesh;
    use crate::quadrature::midedge_rule;

    #[test]
    fn rotation_values() {
        let a = rotation_field();
        assert_eq!(a.value(&Point2::new(1.0, 0.0)), Vector2::new(0.0, 1.0));
        assert_eq!(a.value(&Point2::origin()), Vector2::zeros());
        let p = Point2::new(0.3, -0.7);
        assert_eq!(a.convective_acceleration(&p), Vector2::new(-0.3, 0.7));
    }

    #[test]
    fn rotation_jacobian_matches_finite_differences() {
        let a = rotation_field();
        let p = Point2::new(0.2, 0.9);
        let fd = finite_difference_jacobian(&a, &p, 1e-5);
        assert!((fd - a.jacobian(&p)).abs().max() < 1e-6);
    }

    #[test]
    fn forward_trace_of_rotation() {
        let a = rotation_field();
        let x = Point2::new(1.0, 0.0);
        let y = trace_forward(&a, &x, 0.1, TracerOrder::Second);
        assert!((y - Point2::new(0.995, 0.1)).norm() < 1e-14);
        let y = trace_forward(&a, &x, 0.1, TracerOrder::First);
        assert!((y - Point2::new(1.0, 0.1)).norm() < 1e-14);
    }

    #[test]
    fn zero_field_is_identity() {
        let x = Point2::new(0.4, -0.2);
        assert_eq!(trace_forward(&Zero, &x, 0.3, TracerOrder::Second), x);
        assert_eq!(trace_backward(&Zero, &x, 0.3, TracerOrder::Second), x);
    }

    #[test]
    fn backward_trace_of_rotation() {
        let a = rotation_field();
        let x = Point2::new(0.995, 0.1);
        let y = trace_backward(&a, &x, 0.1, TracerOrder::First);
        assert!((y - Point2::new(1.005, 0.0005)).norm() < 1e-14);
    }

    #[test]
    fn backward_after_forward_is_second_order_close() {
        let a = rotation_field();
        let x = Point2::new(1.0, 0.0);
        for dt in [0.1, 0.05, 0.025] {
            let y = trace_backward(&a, &trace_forward(&a, &x, dt, TracerOrder::First), dt, TracerOrder::First);
            // |a| |grad a| = 1 here
            assert!((y - x).norm() <= 1.0 * dt * dt + 1e-15);
        }
    }

    #[test]
    fn translation_roundtrip_is_exact() {
        let a = Uniform(Vector2::new(1.0, 0.0));
        let x = Point2::new(0.25, 0.5);
        let y = trace_backward(&a, &trace_forward(&a, &x, 0.125, TracerOrder::Second), 0.125, TracerOrder::Second);
        assert_eq!(y, x);
    }

    #[test]
    fn traced_points_with_zero_field() {
        let mesh = build_disk_mesh(30).unwrap();
        let tp = build_traced_points(&mesh, &Zero, &midedge_rule(), 0.1, TracerOrder::Second, Direction::Forward);
        assert_eq!(tp.nodes.len(), 3 * mesh.triangle_count());
        assert!(tp.nodes.iter().all(|n| n.source == n.target));
        let area = mesh.total_area();
        assert!((tp.total_weight() - area).abs() < 1e-12 * area);
        assert_eq!(tp.projected, 0);
    }
}
