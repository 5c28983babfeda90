//! Symmetric quadrature rules on triangles.
//!
//! Points are barycentric triples; weights are normalized to sum to one
//! and get multiplied by the triangle area when integrating.

use nalgebra::Point2;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
    degree: usize,
}

/// Named rule choices, used by scheme configurations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RuleKind {
    MidEdge,
    #[default]
    NinePoint,
}

impl RuleKind {
    pub fn rule(self) -> QuadratureRule {
        match self {
            RuleKind::MidEdge => midedge_rule(),
            RuleKind::NinePoint => nine_point_rule(),
        }
    }
}

impl std::str::FromStr for RuleKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "midedge" | "3" => Ok(RuleKind::MidEdge),
            "ninepoint" | "9" => Ok(RuleKind::NinePoint),
            _ => Err(format!("unknown quadrature `{s}` (expected midedge or ninepoint)")),
        }
    }
}

impl QuadratureRule {
    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Highest total degree integrated exactly.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; 3], f64)> + '_ {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

/// Three-fold orbit of (a, a, 1 - 2a).
fn orbit(a: f64) -> [[f64; 3]; 3] {
    let b = 1.0 - 2.0 * a;
    [[b, a, a], [a, b, a], [a, a, b]]
}

/// Mid-edge rule: three points, weights 1/3, exact up to degree 2.
pub fn midedge_rule() -> QuadratureRule {
    QuadratureRule {
        points: vec![[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]],
        weights: vec![1.0 / 3.0; 3],
        degree: 2,
    }
}

/// Nine-point rule exact up to degree 5 with positive weights.
///
/// Three orbits `(a_k, a_k, 1 - 2 a_k)` with weights `w_k` per point.
/// Fixing `a_1 = 1/4`, the other five parameters solve the symmetric
/// moment equations on the reference triangle `{x, y >= 0, x + y <= 1}`
///
/// `3 (w_1 + w_2 + w_3) = 1`,
/// `sum_k w_k (a_k^p + a_k^p + (1 - 2 a_k)^p) = 2 p! / (p + 2)!` for `p = 2, 3, 4, 5`,
///
/// which together with symmetry give exactness for every monomial of
/// degree at most 5. Any other degree-5 positive rule can be substituted.
pub fn nine_point_rule() -> QuadratureRule {
    const A: [f64; 3] = [0.25, 0.093_594_691_862_040_26, 0.484_618_004_123_473_6];
    const W: [f64; 3] = [0.131_467_514_816_398_38, 0.107_731_696_108_440_56, 0.094_134_122_408_494_4];
    let mut points = Vec::with_capacity(9);
    let mut weights = Vec::with_capacity(9);
    for (a, w) in A.iter().zip(W) {
        points.extend(orbit(*a));
        weights.extend([w; 3]);
    }
    QuadratureRule { points, weights, degree: 5 }
}

/// Barycentric-to-physical map.
pub fn map_point(tri: &[Point2<f64>; 3], bary: &[f64; 3]) -> Point2<f64> {
    Point2::from(tri[0].coords * bary[0] + tri[1].coords * bary[1] + tri[2].coords * bary[2])
}

pub fn triangle_area(tri: &[Point2<f64>; 3]) -> f64 {
    crate::mesh::signed_area(&tri[0], &tri[1], &tri[2]).abs()
}

/// `sum_i f(map(xi_i)) w_i |T|`.
pub fn integrate_on_triangle<F>(rule: &QuadratureRule, tri: &[Point2<f64>; 3], f: F) -> f64
where
    F: Fn(Point2<f64>) -> f64,
{
    let area = triangle_area(tri);
    rule.iter().map(|(b, w)| f(map_point(tri, b)) * w).sum::<f64>() * area
}
