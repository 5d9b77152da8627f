//! At-the-money implied volatility slope: flat under Black–Scholes, negative
//! under Heston with negative correlation, and the two bands it is compared
//! with.
//!
//! ```text
//! cargo run --release --example skew
//! ```

use smalltime::models::HestonParams;
use smalltime::pricing::{bs_call, implied_vol};
use smalltime::simulate::SimConfig;
use smalltime::skew::{self, CallPricer};
use smalltime::ModelSpec;

fn main() -> smalltime::Result<()> {
    let price = bs_call(100.0, 110.0, 0.05, 0.2, 0.5)?;
    let q = implied_vol(price, 100.0, 110.0, 0.05, 0.5)?;
    println!("implied vol of a 0.2-vol call: {:.12}", q.sigma_imp);

    let pricer = CallPricer::BlackScholes { s0: 100.0, r: 0.05, sigma: 0.2 };
    let reports =
        (2..=10).map(|k| skew::skew_report(&pricer, 2f64.powi(-k), None)).collect::<smalltime::Result<Vec<_>>>()?;
    println!("\n{:>10}  {:>10}  {:>24}  {:>24}", "T", "slope", "CLT band", "model-free band");
    for r in &reports {
        println!(
            "{:>10.6}  {:>10.2e}  [{:>10.6}, {:>10.6}]  [{:>10.4}, {:>10.4}]",
            r.t,
            r.slope_est,
            r.clt_lower.unwrap_or(f64::NAN),
            r.clt_upper.unwrap_or(f64::NAN),
            r.mf_lower,
            r.mf_upper
        );
    }
    let w = skew::width_ratio_check(&reports)?;
    println!("width ratio decreasing like sqrt(T): {} (max deviation {:.4})", w.pass, w.max_deviation);

    let p = HestonParams { r: 0.0, kappa: 1.5, theta: 0.04, xi: 0.5, rho: -0.7 };
    let heston = ModelSpec::heston(100.0, 0.04, p)?;
    let cfg = SimConfig::new(200_000, 11).with_max_step(2e-3);
    let r = skew::skew_report(&CallPricer::MonteCarlo { model: &heston, cfg: &cfg }, 0.1, None)?;
    println!(
        "\nHeston rho = -0.7, T = 0.1: slope {:.5} +- {:.5}, model-free band {:?}",
        r.slope_est, r.slope_se, r.verdicts.model_free
    );
    Ok(())
}
