//! Rescaled paths `(f(X_{ut}) - f(x0)) / sqrt(u)` as a process in `t`:
//! marginals, covariances `V min(s, t)` and independent increments.
//!
//! ```text
//! cargo run --release --example fclt
//! ```

use smalltime::clt::{self, Mapping};
use smalltime::simulate::{Scheme, SimConfig};
use smalltime::{JumpLaw, ModelSpec};

fn main() -> smalltime::Result<()> {
    let grid: Vec<f64> = (1..=8).map(|k| k as f64 / 8.0).collect();
    let gbm = ModelSpec::gbm(100.0, 0.05, 0.2)?;
    let cfg = SimConfig::new(10_000, 82).with_scheme(Scheme::Exact);
    let report = clt::fclt_check(&gbm, &Mapping::Log, &[1e-2, 1e-4], &grid, &cfg)?;
    println!("GBM log map, V = {:.4}", report.v);
    for cell in &report.cells {
        let worst = cell.covariances.iter().map(|c| (c.estimate - c.target).abs() / c.std_error).fold(0.0, f64::max);
        println!("  u = {:<6.0e} pass {}  worst covariance deviation {:.2} SE", cell.u, cell.pass(), worst);
    }

    let jd = ModelSpec::jump_diffusion(0.0, 1.0, 5.0, JumpLaw::Uniform { a: 0.5 })?;
    let cfg = SimConfig::new(10_000, 83).with_max_step(1e-3);
    let report = clt::fclt_check(&jd, &Mapping::Identity, &[1e-3, 1e-4], &grid, &cfg)?;
    println!("jump diffusion, identity map");
    for cell in &report.cells {
        let j = cell.jump_fraction.as_ref().expect("jump model");
        println!(
            "  u = {:<6.0e} pass {}  paths with a jump {:.4} (expected {:.4})",
            cell.u,
            cell.pass(),
            j.fraction,
            j.target
        );
    }
    Ok(())
}
