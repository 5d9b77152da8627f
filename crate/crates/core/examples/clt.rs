//! Normalized increments `(log S_t - log S_0) / sqrt(t)` of geometric Brownian
//! motion against their Gaussian limit `N(0, sigma^2)`, plus a
//! two-dimensional Heston check through Cramér–Wold projections.
//!
//! ```text
//! cargo run --release --example clt
//! ```

use smalltime::clt::{self, Mapping};
use smalltime::models::HestonParams;
use smalltime::simulate::{Scheme, SimConfig};
use smalltime::ModelSpec;

fn main() -> smalltime::Result<()> {
    let gbm = ModelSpec::gbm(100.0, 0.05, 0.2)?;
    let cfg = SimConfig::new(100_000, 1).with_scheme(Scheme::Exact);
    let report = clt::clt_check(&gbm, &Mapping::Log, &[1e-1, 1e-2, 1e-4, 1e-6], &cfg)?;
    println!("GBM, log map, V = {:.4}", report.limit.v[(0, 0)]);
    for cell in &report.cells {
        let ks = cell.ks.as_ref().expect("non-degenerate");
        println!("  t = {:<6.0e} KS = {:.5} (critical {:.5})", cell.t, ks.statistic, ks.critical);
    }
    println!("  verdict: {:?}", report.verdict);

    let p = HestonParams { r: 0.0, kappa: 1.5, theta: 0.04, xi: 0.3, rho: -0.7 };
    let heston = ModelSpec::heston(100.0, 0.04, p)?;
    let cfg = SimConfig::new(20_000, 2).with_max_step(1e-5);
    let report = clt::clt_check(&heston, &Mapping::Identity, &[1e-3], &cfg)?;
    println!("\nHeston, identity map, {} directions", report.directions.len());
    println!("  limit covariance eigenvalues {:?}", report.limit.eigenvalues);
    println!("  verdict: {:?}", report.verdict);
    Ok(())
}
