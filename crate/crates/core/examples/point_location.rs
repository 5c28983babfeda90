//! Locate points by walking through triangle neighbours, and project
//! points that fall outside the domain back onto its boundary.

use dcgm::mesh::{build_disk_mesh, PointLocator};
use nalgebra::Point2;

fn main() -> dcgm::Result<()> {
    let mesh = build_disk_mesh(100)?;
    let mut locator = PointLocator::new(&mesh);

    for p in [Point2::new(0.0, 0.0), Point2::new(0.5, -0.3), Point2::new(-0.9, 0.2), Point2::new(1.3, 0.4)] {
        let (loc, projected) = locator.locate_or_project(&p);
        let [a, b, c] = loc.barycentric;
        println!(
            "({:5.2}, {:5.2}) -> triangle {:4}  bary ({a:.3}, {b:.3}, {c:.3}){}",
            p.x,
            p.y,
            loc.triangle,
            if projected { "  projected" } else { "" }
        );
    }

    // The walk starts from the previous hit, so a sweep along a curve
    // only crosses a handful of triangles per query.
    let hits = (0..1000)
        .filter_map(|i| {
            let t = i as f64 * 1e-3 * std::f64::consts::TAU;
            locator.locate(&Point2::new(0.6 * t.cos(), 0.6 * t.sin()))
        })
        .count();
    println!("{hits} / 1000 points on the circle r = 0.6 located");
    Ok(())
}
