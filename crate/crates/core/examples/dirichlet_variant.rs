//! DCGM with Dirichlet data on the boundary, here the exact bell.

use std::sync::Arc;

use dcgm::bench::{default_steps, run_bell_dirichlet, BellParams, BenchSettings};
use dcgm::mesh::build_disk_mesh;

fn main() -> dcgm::Result<()> {
    let n = 100;
    let mesh = Arc::new(build_disk_mesh(n)?);
    let params = BellParams::new(0.01, default_steps(n));
    for boundary_integral in [true, false] {
        let (_, r) = run_bell_dirichlet(&mesh, &params, &BenchSettings::default(), boundary_integral)?;
        println!(
            "boundary integral {boundary_integral:5}: max {:.5}  L2 error {:.4e}",
            r.max,
            r.l2_error.unwrap()
        );
    }
    Ok(())
}
