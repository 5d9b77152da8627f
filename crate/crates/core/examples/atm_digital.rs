//! At-the-money digital prices under Heston approach `exp(-rT) / 2` as the
//! maturity shrinks; fixed-strike digitals are priced from a batch.
//!
//! ```text
//! cargo run --release --example atm_digital
//! ```

use smalltime::models::HestonParams;
use smalltime::pricing::{self, MarketParams, RateSpec};
use smalltime::simulate::SimConfig;
use smalltime::ModelSpec;

fn main() -> smalltime::Result<()> {
    let p = HestonParams { r: 0.02, kappa: 1.5, theta: 0.04, xi: 0.3, rho: -0.7 };
    let model = ModelSpec::heston(100.0, 0.04, p)?;
    let cfg = SimConfig::new(100_000, 6).with_max_step(1e-4);
    let report = pricing::atm_digital_limit_check(&model, &[1e-1, 1e-2, 1e-3], &cfg)?;
    println!("{:>6}  {:>8}  {:>8}  {:>18}", "T", "price", "P(S>S0)", "99% interval");
    for e in &report.estimates {
        println!(
            "{:>6.0e}  {:>8.5}  {:>8.5}  [{:.5}, {:.5}]",
            e.t, e.price, e.prob.p_hat, e.prob.ci_low, e.prob.ci_high
        );
    }
    println!("limit 1/2 inside the interval at the smallest maturity: {}", report.pass);

    let batch = vec![
        MarketParams { s0: 100.0, k: 95.0, t: 0.25, r: RateSpec::Constant(0.02) },
        MarketParams { s0: 100.0, k: 105.0, t: 0.25, r: RateSpec::Step { breaks: vec![0.1], rates: vec![0.01, 0.03] } },
    ];
    let cfg = SimConfig::new(50_000, 7).with_max_step(1e-3);
    for e in pricing::price_digital_batch(&model, &batch, &cfg)? {
        println!("K = {:<5} T = {}: {:.5} [{:.5}, {:.5}]", e.k, e.t, e.price, e.ci_low, e.ci_high);
    }
    Ok(())
}
