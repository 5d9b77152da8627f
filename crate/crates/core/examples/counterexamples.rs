//! Models outside the small-time assumptions: the at-the-money probability
//! need not tend to 1/2, and the Gaussian limit can collapse.
//!
//! ```text
//! cargo run --release --example counterexamples
//! ```

use smalltime::clt::{self, Mapping};
use smalltime::models::{check_assumptions, small_time_matrix};
use smalltime::simulate::{simulate_terminal, Scheme, SimConfig};
use smalltime::stats::{gamma_cdf, prob_exceed};
use smalltime::ModelSpec;

/// Why the 1/2 limit is not implied for this model.
fn reason(model: &ModelSpec, t: f64) -> String {
    let violated = check_assumptions(model, t).violated();
    if !violated.is_empty() {
        return format!("assumptions {violated:?} violated");
    }
    match small_time_matrix(model) {
        Err(_) => "no diffusion part".into(),
        Ok(l) if l.iter().all(|v| *v == 0.0) => "degenerate limit".into(),
        Ok(_) => "non-degenerate limit".into(),
    }
}

fn report(name: &str, model: &ModelSpec, t: f64, exact: f64, seed: u64) -> smalltime::Result<()> {
    let cfg = SimConfig::new(200_000, seed).with_scheme(Scheme::Exact);
    let sample = simulate_terminal(model, t, &cfg)?;
    let est = prob_exceed(&sample, 0, model.atm_level(t), 0.99)?;
    println!(
        "{name:<26} t = {t:<6.0e} P = {:.4} [{:.4}, {:.4}]  exact {exact:.4}  {}",
        est.p_hat,
        est.ci_low,
        est.ci_high,
        reason(model, t)
    );
    Ok(())
}

fn main() -> smalltime::Result<()> {
    let qd = ModelSpec::quantile_drift_bm(0.25)?;
    for (i, t) in [1.0, 1e-2, 1e-4].into_iter().enumerate() {
        report("quantile drift p = 0.25", &qd, t, 0.25, i as u64)?;
    }
    let pm = ModelSpec::poisson_martingale(1.0)?;
    for (i, t) in [0.5, 1e-2].into_iter().enumerate() {
        report("compensated Poisson", &pm, t, (-t).exp(), 10 + i as u64)?;
    }
    for delta in [2.0, 20.0] {
        let bes = ModelSpec::squared_bessel(delta, 0.0)?;
        let exact = 1.0 - gamma_cdf(delta, 0.5 * delta, 2.0)?;
        report(&format!("squared Bessel delta = {delta}"), &bes, 1e-2, exact, 20 + delta as u64)?;
    }

    let sq = ModelSpec::squared_bm()?;
    let cfg = SimConfig::new(100_000, 4).with_scheme(Scheme::Exact);
    let r = clt::clt_check(&sq, &Mapping::Identity, &[1e-1, 1e-2, 1e-3, 1e-4], &cfg)?;
    println!("\nsquared BM: verdict {:?}", r.verdict);
    for c in &r.cells {
        println!("  t = {:<6.0e} 99% quantile of |Y| = {:.5}", c.t, c.abs_q99.unwrap_or(f64::NAN));
    }
    Ok(())
}
