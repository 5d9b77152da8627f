//! Envelope `[e^{f1}, e^{f2}]` for `P(X_t > X_0)` around the exact value for
//! Brownian motion with drift, and the validity horizon for several drift
//! bounds.
//!
//! ```text
//! cargo run --release --example bracketing
//! ```

use smalltime::bounds::{self, DriftDiffusionBound};
use smalltime::simulate::SimConfig;
use smalltime::ModelSpec;

fn main() -> smalltime::Result<()> {
    let model = ModelSpec::drifted_bm(0.5, 1.0)?;
    let bound = bounds::drift_bound_for_model(&model)?;
    let grid: Vec<f64> = (0..=6).map(|k| 10f64.powi(-k)).collect();
    let report = bounds::verify_bracketing(&model, &grid, &SimConfig::new(1, 0))?;

    println!("drifted BM b = 0.5, sigma = 1, c = {}", bound.c());
    println!("{:>8}  {:>10}  {:>10}  {:>10}", "t", "e^f1", "exact", "e^f2");
    for p in &report.points {
        println!("{:>8.0e}  {:>10.6}  {:>10.6}  {:>10.6}", p.t, p.e_f1, p.exact.unwrap_or(f64::NAN), p.e_f2);
    }
    println!("all inside: {}", report.pass());

    println!("\nvalidity horizon t* and remainder limits");
    for c in [0.25, 0.5, 1.0, 2.0] {
        let b = DriftDiffusionBound::new(c)?;
        println!("c = {c:<4}  t* = {:<8.4}  lim |e^f - expansion| / t = {:.6}", b.horizon(), b.remainder_limit());
    }
    Ok(())
}
