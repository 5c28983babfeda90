//! Forward Kolmogorov equation of Heston's model and a put price.
//!
//! cargo run --release --example heston -- 60 300

use dcgm::heston::{heston_run_with, HestonParams};

fn main() -> dcgm::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let nx: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(60);
    let steps: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(300);

    let params = HestonParams::default();
    let every = (steps / 5).max(1);
    let result = heston_run_with(&params, nx, nx, steps, |step, u| {
        if step % every == 0 {
            println!("step {step:5}  mass {:.10}  min {:+.2e}", u.integral(), u.min_coeff());
        }
        Ok(())
    })?;

    println!("put price at T = {}: {:.4} (strike {})", params.t_final, result.price, params.strike);
    if result.negativity_warning {
        println!("warning: the density went below -1e-6");
    }
    if result.leakage_warning {
        println!("warning: mass reached the far boundary");
    }
    Ok(())
}
