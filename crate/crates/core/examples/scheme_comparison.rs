//! Same bell, four schemes: DCGM, PCGM, SUPG and the centered method.

use std::sync::Arc;

use dcgm::bench::{default_steps, exact_summary, run_bell, write_table2, BellParams, BenchSettings};
use dcgm::mesh::build_disk_mesh;
use dcgm::schemes::SchemeKind;

fn main() -> dcgm::Result<()> {
    let n = 100;
    let mesh = Arc::new(build_disk_mesh(n)?);
    let params = BellParams { r: 20.0, ..BellParams::new(1e-3, default_steps(n)) };
    let settings = BenchSettings::default();

    let runs = SchemeKind::ALL
        .iter()
        .map(|&s| run_bell(&mesh, s, &params, &settings).map(|(_, r)| r))
        .collect::<dcgm::Result<Vec<_>>>()?;
    let (_, exact) = exact_summary(&mesh, &params);
    write_table2(&exact, &runs, std::io::stdout().lock())?;
    Ok(())
}
