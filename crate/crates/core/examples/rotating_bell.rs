//! One full turn of a Gaussian bell in the rotating field a = (-y, x),
//! solved with the dual characteristic-Galerkin scheme.
//!
//! cargo run --release --example rotating_bell -- 200 1e-3 20

use std::sync::Arc;

use dcgm::bench::{cross_section, default_steps, run_bell, BellParams, BenchSettings};
use dcgm::mesh::build_disk_mesh;
use dcgm::schemes::SchemeKind;

fn main() -> dcgm::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(200);
    let nu: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1e-4);
    let r: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(10.0);

    let mesh = Arc::new(build_disk_mesh(n)?);
    let params = BellParams { r, ..BellParams::new(nu, default_steps(n)) };
    let (u, report) = run_bell(&mesh, SchemeKind::Dcgm, &params, &BenchSettings::default())?;

    println!("{} vertices, {} steps of dt = {:.4}", report.vertices, report.n_steps, report.dt);
    println!("min {:.3e}  max {:.5}  integral {:.6}", report.min, report.max, report.integral);
    println!("L2 error {:.4e}, worst mass drift {:.1e}", report.l2_error.unwrap(), report.max_mass_drift);

    let peak = cross_section(&u, 201).into_iter().fold((0.0, f64::MIN), |a, s| if s.1 > a.1 { s } else { a });
    println!("peak on y = 0 at x = {:.3} (started at x = {:.3})", peak.0, params.x0.x);
    Ok(())
}
