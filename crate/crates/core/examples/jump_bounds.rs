//! The envelope depends only on the drift bound of the continuous part, so it
//! also brackets `P(X_t > X_0)` for a jump diffusion with symmetric jumps.
//!
//! ```text
//! cargo run --release --example jump_bounds
//! ```

use smalltime::bounds;
use smalltime::simulate::SimConfig;
use smalltime::{JumpLaw, ModelSpec};

fn main() -> smalltime::Result<()> {
    let model = ModelSpec::jump_diffusion(0.3, 1.0, 5.0, JumpLaw::TwoPoint { a: 0.4 })?;
    let grid = [1e-3, 1e-2, 1e-1];
    // constant coefficients: one Euler step with superposed jumps is exact in law
    let cfg = SimConfig::new(1_000_000, 7).with_max_step(0.1);
    let report = bounds::verify_bracketing(&model, &grid, &cfg)?;
    println!("jump diffusion b = 0.3, sigma = 1, 5 jumps of +-0.4 per unit time, c = {}", report.c);
    for p in &report.points {
        let e = p.estimate.as_ref().expect("simulated");
        println!(
            "t = {:<6.0e} [{:.4}, {:.4}]  MC {:.4} [{:.4}, {:.4}]  overlap {}",
            p.t, p.e_f1, p.e_f2, e.p_hat, e.ci_low, e.ci_high, p.pass
        );
    }
    Ok(())
}
