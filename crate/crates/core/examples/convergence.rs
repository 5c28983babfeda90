//! L2 error after one turn on three mesh sizes and the fitted order.

use dcgm::bench::{convergence_study, BellParams, BenchSettings};
use dcgm::schemes::SchemeKind;

fn main() -> dcgm::Result<()> {
    let params = BellParams { r: 20.0, ..BellParams::new(1e-3, 1) };
    let study = convergence_study(SchemeKind::Dcgm, &[50, 100, 200], &params, &BenchSettings::default())?;
    for (run, h) in study.runs.iter().zip(&study.h) {
        println!("N = {:3}  h = {h:.4}  error = {:.4e}", run.n_boundary, run.l2_error.unwrap());
    }
    println!("order {:.2}", study.order);
    Ok(())
}
