//! Property tests for the building blocks.

use dcgm::fem::{assemble_mass, assemble_stiffness, FieldP1};
use dcgm::linalg::{cg_solve, SolverOptions, SparseMatrix};
use dcgm::mesh::{build_disk_mesh, build_rect_mesh, read_mesh, write_mesh, PointLocator};
use dcgm::quadrature::{integrate_on_triangle, midedge_rule, nine_point_rule, triangle_area};
use nalgebra::Point2;
use proptest::prelude::*;
use std::sync::{Arc, OnceLock};

fn disk() -> &'static dcgm::Mesh {
    static MESH: OnceLock<dcgm::Mesh> = OnceLock::new();
    MESH.get_or_init(|| build_disk_mesh(60).unwrap())
}

fn barycentric(t: &[Point2<f64>; 3], p: &Point2<f64>) -> [f64; 3] {
    let m = nalgebra::Matrix2::from_columns(&[t[1] - t[0], t[2] - t[0]]);
    let l = m.try_inverse().unwrap() * (p - t[0]);
    [1.0 - l.x - l.y, l.x, l.y]
}

fn point() -> impl Strategy<Value = Point2<f64>> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(x, y)| Point2::new(x, y))
}

fn triangle() -> impl Strategy<Value = [Point2<f64>; 3]> {
    [point(), point(), point()].prop_filter("degenerate", |t| triangle_area(t) > 1e-3)
}

// Integral of a linear function is its value at the centroid times the area.
proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rules_integrate_affine_functions(t in triangle(), a in -3.0..3.0f64, b in -3.0..3.0f64, c in -3.0..3.0f64) {
        let f = |p: Point2<f64>| a * p.x + b * p.y + c;
        let g = Point2::from((t[0].coords + t[1].coords + t[2].coords) / 3.0);
        let exact = f(g) * triangle_area(&t);
        for rule in [midedge_rule(), nine_point_rule()] {
            let got = integrate_on_triangle(&rule, &t, f);
            prop_assert!((got - exact).abs() <= 1e-12 * (1.0 + exact.abs()));
        }
    }

    // Product of two affine functions: exact value from the vertex Gram
    // matrix |T|/12 * (1 + delta_ij).
    #[test]
    fn rules_integrate_products_of_affine_functions(t in triangle(), u in prop::array::uniform3(-2.0..2.0f64), v in prop::array::uniform3(-2.0..2.0f64)) {
        let area = triangle_area(&t);
        let mut exact = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                exact += area / 12.0 * if i == j { 2.0 } else { 1.0 } * u[i] * v[j];
            }
        }
        let interp = |w: [f64; 3], p: Point2<f64>| {
            let l = barycentric(&t, &p);
            w[0] * l[0] + w[1] * l[1] + w[2] * l[2]
        };
        for rule in [midedge_rule(), nine_point_rule()] {
            let got = integrate_on_triangle(&rule, &t, |p| interp(u, p) * interp(v, p));
            prop_assert!((got - exact).abs() <= 1e-10 * (1.0 + exact.abs()));
        }
    }

    #[test]
    fn location_does_not_depend_on_the_hint(r in 0.0..0.99f64, theta in 0.0..std::f64::consts::TAU, hint in 0usize..10_000) {
        let mesh = disk();
        let p = Point2::new(r * theta.cos(), r * theta.sin());
        let hint = hint % mesh.triangle_count();
        let a = mesh.locate_point(&p, None).expect("inside the disk");
        let b = mesh.locate_point(&p, Some(hint)).expect("inside the disk");
        prop_assert_eq!(a, b);
        prop_assert!(a.barycentric.iter().all(|&l| l >= -1e-12));
        prop_assert!((a.barycentric.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let q = mesh.point_at(a.triangle, &a.barycentric);
        prop_assert!((q - p).norm() < 1e-12);
    }

    #[test]
    fn projection_lands_in_the_domain(p in point()) {
        let mesh = disk();
        let mut locator = PointLocator::new(mesh);
        let (loc, projected) = locator.locate_or_project(&p);
        prop_assert!(loc.barycentric.iter().all(|&l| l >= -1e-10));
        prop_assert_eq!(projected, mesh.locate_point(&p, None).is_none());
    }

    #[test]
    fn cg_solves_random_spd_systems(n in 2usize..40, seed in prop::collection::vec(-1.0..1.0f64, 200), rhs in prop::collection::vec(-1.0..1.0f64, 40)) {
        // symmetric, strictly diagonally dominant with a positive diagonal
        let mut trip = Vec::new();
        let mut diag = vec![1.0; n];
        for (k, w) in seed.iter().enumerate() {
            let i = k % n;
            let j = (k * 7 + 3) % n;
            if i != j {
                trip.push((i, j, *w));
                trip.push((j, i, *w));
                diag[i] += w.abs();
                diag[j] += w.abs();
            }
        }
        trip.extend(diag.iter().enumerate().map(|(i, d)| (i, i, *d)));
        let a = SparseMatrix::from_triplets(n, trip).unwrap();
        prop_assert!(a.asymmetry() < 1e-14);
        let b = &rhs[..n];
        let (x, report) = cg_solve(&a, b, None, &SolverOptions::default());
        prop_assert!(report.converged);
        let ax = a.mul_vec(&x);
        let res: f64 = ax.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        let bn: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(res <= 1e-9 * bn.max(1e-300));
    }

    #[test]
    fn mesh_text_round_trip(nx in 2usize..12, ny in 2usize..12, w in 0.1..50.0f64, h in 0.1..50.0f64) {
        let mesh = build_rect_mesh(nx, ny, w, h).unwrap();
        let mut buf = Vec::new();
        write_mesh(&mesh, &mut buf).unwrap();
        let back = read_mesh(buf.as_slice()).unwrap();
        prop_assert_eq!(back.vertices(), mesh.vertices());
        prop_assert_eq!(back.triangles(), mesh.triangles());
        prop_assert_eq!(back.boundary_edges().len(), mesh.boundary_edges().len());
        prop_assert!((back.total_area() - w * h).abs() <= 1e-12 * w * h);
    }

    // 1^T M 1 is the area and K annihilates constants.
    #[test]
    fn assembled_matrices_see_constants(nx in 2usize..10, ny in 2usize..10, c in -5.0..5.0f64) {
        let mesh = build_rect_mesh(nx, ny, 2.0, 3.0).unwrap();
        let m = assemble_mass(&mesh);
        let k = assemble_stiffness(&mesh);
        let one = vec![1.0; mesh.vertex_count()];
        prop_assert!((m.quadratic_form(&one, &one) - 6.0).abs() < 1e-12);
        prop_assert!(k.mul_vec(&vec![c; mesh.vertex_count()]).iter().all(|v| v.abs() < 1e-10));
        let u = FieldP1::constant(Arc::new(mesh), c);
        prop_assert!((u.integral() - 6.0 * c).abs() < 1e-10);
    }
}
