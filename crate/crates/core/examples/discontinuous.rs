//! Rotate an indicator function and watch over- and undershoot.

use dcgm::bench::{discontinuous_test, BenchSettings};

fn main() -> dcgm::Result<()> {
    for nu in [1e-3, 1e-4] {
        let (_, r) = discontinuous_test(100, nu, &BenchSettings::default())?;
        println!(
            "nu = {nu:.0e}: min {:+.4}  max {:.4}  mass drift {:.1e}",
            r.min, r.max, r.max_mass_drift
        );
    }
    Ok(())
}
