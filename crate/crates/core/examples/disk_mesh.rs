//! Build the unit-disk mesh, print its statistics and save it.
//!
//! cargo run --example disk_mesh -- 200 disk.msh

use dcgm::mesh::{build_disk_mesh, load_mesh, save_mesh};

fn main() -> dcgm::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(200);
    let path = args.next().unwrap_or_else(|| "disk.msh".into());

    let mesh = build_disk_mesh(n)?;
    println!(
        "N = {n}: {} vertices, {} triangles, {} boundary edges",
        mesh.vertex_count(),
        mesh.triangle_count(),
        mesh.boundary_edges().len()
    );
    println!("area {:.6} (pi = {:.6}), h_max {:.4}", mesh.total_area(), std::f64::consts::PI, mesh.h_max());

    save_mesh(&mesh, &path)?;
    let back = load_mesh(&path)?;
    assert_eq!(back.triangles(), mesh.triangles());
    println!("wrote {path}");
    Ok(())
}
