//! Black–Scholes analytics, implied volatility and Monte Carlo digitals.
//!
//! `d1 = (ln(S0/K) + (r + sigma^2/2) T) / (sigma sqrt(T))`, `d2 = d1 - sigma sqrt(T)`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::clt::{limit_covariance, Mapping, MappingSpec};
use crate::error::{Error, Result};
use crate::models::{check_assumptions, small_time_matrix, Coordinates, ModelSpec};
use crate::simulate::{derive_seed, simulate_terminal, McSample, SimConfig};
use crate::stats::{normal_cdf, normal_pdf, prob_exceed, ProbEstimate};

pub const VOL_BRACKET: (f64, f64) = (1e-6, 10.0);
pub const BISECTION_STEPS: usize = 80;
const NEWTON_STEPS: usize = 5;
/// Implied-vol residual target relative to `S0`.
pub const VOL_RESIDUAL: f64 = 1e-10;
/// Confidence of the at-the-money digital limit check.
pub const ATM_CONFIDENCE: f64 = 0.99;

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {v}")))
    }
}

fn check_inputs(s0: f64, k: f64, r: f64, sigma: f64, t: f64) -> Result<()> {
    check_positive("S0", s0)?;
    check_positive("K", k)?;
    check_positive("sigma", sigma)?;
    check_positive("T", t)?;
    if !r.is_finite() {
        return Err(Error::Domain(format!("rate must be finite, got {r}")));
    }
    Ok(())
}

/// `(d1, d2)`.
pub fn bs_d(s0: f64, k: f64, r: f64, sigma: f64, t: f64) -> (f64, f64) {
    let sd = sigma * t.sqrt();
    let d1 = ((s0 / k).ln() + (r + 0.5 * sigma * sigma) * t) / sd;
    (d1, d1 - sd)
}

pub fn bs_call(s0: f64, k: f64, r: f64, sigma: f64, t: f64) -> Result<f64> {
    check_inputs(s0, k, r, sigma, t)?;
    let (d1, d2) = bs_d(s0, k, r, sigma, t);
    Ok(s0 * normal_cdf(d1) - k * (-r * t).exp() * normal_cdf(d2))
}

pub fn bs_put(s0: f64, k: f64, r: f64, sigma: f64, t: f64) -> Result<f64> {
    check_inputs(s0, k, r, sigma, t)?;
    let (d1, d2) = bs_d(s0, k, r, sigma, t);
    Ok(k * (-r * t).exp() * normal_cdf(-d2) - s0 * normal_cdf(-d1))
}

/// `dC/dsigma = S0 phi(d1) sqrt(T)`.
pub fn bs_vega(s0: f64, k: f64, r: f64, sigma: f64, t: f64) -> Result<f64> {
    check_inputs(s0, k, r, sigma, t)?;
    let (d1, _) = bs_d(s0, k, r, sigma, t);
    Ok(s0 * normal_pdf(d1) * t.sqrt())
}

/// Cash-or-nothing call `e^{-rT} Phi(d2)`.
pub fn bs_digital(s0: f64, k: f64, r: f64, sigma: f64, t: f64) -> Result<f64> {
    check_inputs(s0, k, r, sigma, t)?;
    let (_, d2) = bs_d(s0, k, r, sigma, t);
    Ok((-r * t).exp() * normal_cdf(d2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolQuote {
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub sigma_imp: f64,
    pub solver_residual: f64,
}

/// Inverts [`bs_call`] in `sigma` by bisection on [`VOL_BRACKET`] followed by
/// Newton steps with the vega.
pub fn implied_vol(target: f64, s0: f64, k: f64, r: f64, t: f64) -> Result<VolQuote> {
    check_inputs(s0, k, r, 1.0, t)?;
    let lower = (s0 - k * (-r * t).exp()).max(0.0);
    if !(target > lower && target < s0) {
        return Err(Error::NoArbViolation { target, lower, upper: s0 });
    }
    let price = |s: f64| bs_call(s0, k, r, s, t);
    let (mut lo, mut hi) = VOL_BRACKET;
    if price(lo)? > target || price(hi)? < target {
        return Err(Error::VolBracket { target, lo, hi });
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if price(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut sigma = 0.5 * (lo + hi);
    let mut residual = (price(sigma)? - target).abs();
    for _ in 0..NEWTON_STEPS {
        let vega = bs_vega(s0, k, r, sigma, t)?;
        if vega <= 0.0 || residual == 0.0 {
            break;
        }
        let next = sigma - (price(sigma)? - target) / vega;
        if !(next >= VOL_BRACKET.0 && next <= VOL_BRACKET.1) {
            break;
        }
        let next_residual = (price(next)? - target).abs();
        if next_residual >= residual {
            break;
        }
        sigma = next;
        residual = next_residual;
    }
    if residual > VOL_RESIDUAL * s0 {
        return Err(Error::VolBracket { target, lo: VOL_BRACKET.0, hi: VOL_BRACKET.1 });
    }
    Ok(VolQuote { k, t, sigma_imp: sigma, solver_residual: residual })
}

/// Deterministic short rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RateSpec {
    Constant(f64),
    /// `rates[i]` applies on `[breaks[i-1], breaks[i])`, with `breaks`
    /// increasing and `rates.len() == breaks.len() + 1`.
    Step {
        breaks: Vec<f64>,
        rates: Vec<f64>,
    },
}

impl RateSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            RateSpec::Constant(r) if r.is_finite() => Ok(()),
            RateSpec::Constant(r) => Err(Error::InvalidConfig(format!("rate {r} is not finite"))),
            RateSpec::Step { breaks, rates } => {
                if rates.len() != breaks.len() + 1 {
                    return Err(Error::InvalidConfig(format!("{} rates for {} breaks", rates.len(), breaks.len())));
                }
                if breaks.windows(2).any(|w| !(w[1] > w[0])) || breaks.iter().any(|b| !(*b > 0.0)) {
                    return Err(Error::InvalidConfig("breaks must be positive and increasing".into()));
                }
                if rates.iter().any(|r| !r.is_finite()) {
                    return Err(Error::InvalidConfig("rates must be finite".into()));
                }
                Ok(())
            }
        }
    }

    /// `int_0^T r(s) ds`.
    pub fn integral(&self, t: f64) -> f64 {
        match self {
            RateSpec::Constant(r) => r * t,
            RateSpec::Step { breaks, rates } => {
                let mut acc = 0.0;
                let mut start = 0.0;
                for (i, &r) in rates.iter().enumerate() {
                    let end = breaks.get(i).copied().unwrap_or(f64::INFINITY).min(t);
                    if end > start {
                        acc += r * (end - start);
                    }
                    start = end;
                    if start >= t {
                        break;
                    }
                }
                acc
            }
        }
    }

    pub fn discount(&self, t: f64) -> f64 {
        (-self.integral(t)).exp()
    }
}

/// Discounted digital estimate `D(T) P(S_T > K)` with the interval of the
/// undiscounted probability scaled by the discount factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DigitalEstimate {
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub discount: f64,
    pub prob: ProbEstimate,
    pub price: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl DigitalEstimate {
    fn new(k: f64, t: f64, discount: f64, prob: ProbEstimate) -> Self {
        DigitalEstimate {
            k,
            t,
            discount,
            price: discount * prob.p_hat,
            ci_low: discount * prob.ci_low,
            ci_high: discount * prob.ci_high,
            prob,
        }
    }
}

/// Digital price from an existing terminal sample; `level` is in state
/// coordinates.
pub fn digital_from_sample(
    sample: &McSample,
    level: f64,
    k: f64,
    t: f64,
    discount: f64,
    confidence: f64,
) -> Result<DigitalEstimate> {
    let prob = prob_exceed(sample, 0, level, confidence)?;
    Ok(DigitalEstimate::new(k, t, discount, prob))
}

fn check_price_model(model: &ModelSpec) -> Result<()> {
    if model.coords() == Coordinates::Price && model.x0()[0] <= 0.0 {
        return Err(Error::Domain("price model needs a positive initial price".into()));
    }
    Ok(())
}

/// `E[exp(-int r) 1{S_T > K}]` for a deterministic rate, with a 99% interval.
pub fn mc_digital(model: &ModelSpec, k: f64, t: f64, rate: &RateSpec, cfg: &SimConfig) -> Result<DigitalEstimate> {
    check_positive("K", k)?;
    check_positive("T", t)?;
    check_price_model(model)?;
    rate.validate()?;
    let sample = simulate_terminal(model, t, cfg)?;
    digital_from_sample(&sample, model.price_to_state(k), k, t, rate.discount(t), ATM_CONFIDENCE)
}

/// At-the-money digital estimates along a maturity schedule, with the level
/// given by [`ModelSpec::atm_level`] and the model's own rate. Maturity
/// `t_schedule[i]` uses seed `derive_seed(cfg.seed, i)`.
pub fn atm_digital_estimates(model: &ModelSpec, t_schedule: &[f64], cfg: &SimConfig) -> Result<Vec<DigitalEstimate>> {
    t_schedule
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            check_positive("T", t)?;
            let run = cfg.clone().with_seed(derive_seed(cfg.seed, i as u64));
            let sample = simulate_terminal(model, t, &run)?;
            let k = model.spot();
            let discount = (-model.rate() * t).exp();
            digital_from_sample(&sample, model.atm_level(t), k, t, discount, ATM_CONFIDENCE)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtmDigitalReport {
    pub estimates: Vec<DigitalEstimate>,
    /// `P(S_T > S0)` interval at the smallest maturity, discount removed.
    pub smallest_t_prob: ProbEstimate,
    pub limit: f64,
    pub pass: bool,
}

/// Checks that the undiscounted ATM digital tends to `1/2`: the 99% interval
/// at the smallest maturity must contain `1/2`. Requires a model satisfying
/// the small-time assumptions with a non-degenerate limit for the first
/// coordinate.
pub fn atm_digital_limit_check(model: &ModelSpec, t_schedule: &[f64], cfg: &SimConfig) -> Result<AtmDigitalReport> {
    if t_schedule.is_empty() || t_schedule.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidConfig("maturity schedule must be non-empty and strictly decreasing".into()));
    }
    let horizon = t_schedule[0];
    let adm = check_assumptions(model, horizon);
    if !adm.clt_applies() {
        return Err(Error::OutOfScope(format!(
            "{} violates small-time assumptions {:?}",
            model.kind(),
            adm.violated()
        )));
    }
    let l = small_time_matrix(model).map_err(|_| Error::DegenerateLimit)?;
    let v = limit_covariance(&MappingSpec::new(Mapping::Coordinate(0), model.x0())?, &l)?;
    if v.is_degenerate() {
        return Err(Error::DegenerateLimit);
    }
    let estimates = atm_digital_estimates(model, t_schedule, cfg)?;
    let smallest_t_prob = estimates.last().expect("non-empty schedule").prob;
    let pass = smallest_t_prob.contains(0.5);
    Ok(AtmDigitalReport { estimates, smallest_t_prob, limit: 0.5, pass })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketParams {
    #[serde(rename = "S0")]
    pub s0: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub r: RateSpec,
}

impl MarketParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("S0", self.s0)?;
        check_positive("K", self.k)?;
        check_positive("T", self.t)?;
        self.r.validate()
    }
}

/// Prices Monte Carlo digitals for a batch of market parameters. Entry `i`
/// restarts the model at `S0` and uses seed `derive_seed(cfg.seed, i)`.
pub fn price_digital_batch(model: &ModelSpec, batch: &[MarketParams], cfg: &SimConfig) -> Result<Vec<DigitalEstimate>> {
    batch
        .iter()
        .enumerate()
        .map(|(i, p)| {
            p.validate()?;
            let mut x0 = model.x0().to_vec();
            x0[0] = model.price_to_state(p.s0);
            let m = model.with_x0(x0)?;
            let run = cfg.clone().with_seed(derive_seed(cfg.seed, i as u64));
            mc_digital(&m, p.k, p.t, &p.r, &run)
        })
        .collect()
}

/// CSV with columns `K, T, price, ci_low, ci_high`.
pub fn write_price_csv<W: Write>(rows: &[DigitalEstimate], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["K", "T", "price", "ci_low", "ci_high"])?;
    for r in rows {
        w.write_record([r.k, r.t, r.price, r.ci_low, r.ci_high].map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::HestonParams;
    use crate::simulate::Scheme;

    #[test]
    fn closed_forms() {
        let c = bs_call(100.0, 100.0, 0.0, 0.2, 1.0).unwrap();
        assert!((c - 7.965_567_455_405_796).abs() < 1e-11);
        assert!((bs_call(100.0, 1e-12, 0.03, 0.2, 1.0).unwrap() - 100.0).abs() < 1e-9);
        let d = bs_digital(100.0, 100.0, 0.0, 0.2, 1.0).unwrap();
        assert!((d - normal_cdf(-0.1)).abs() < 1e-15);
        assert!(bs_call(-1.0, 1.0, 0.0, 0.2, 1.0).is_err());
        assert!(bs_call(1.0, 1.0, 0.0, 0.2, 0.0).is_err());
    }

    #[test]
    fn digital_identities() {
        for &(k, r, s, t) in &[(80.0f64, 0.05f64, 0.2f64, 0.5f64), (100.0, 0.0, 0.4, 2.0), (130.0, 0.1, 0.15, 0.1)] {
            let disc = (-r * t).exp();
            let (_, d2) = bs_d(100.0, k, r, s, t);
            let dig = bs_digital(100.0, k, r, s, t).unwrap();
            assert!((disc - dig - disc * normal_cdf(-d2)).abs() < 1e-12);
            let h = 1e-4;
            let dk = (bs_call(100.0, k + h, r, s, t).unwrap() - bs_call(100.0, k - h, r, s, t).unwrap()) / (2.0 * h);
            assert!((dk + dig).abs() < 1e-6, "{dk} {dig}");
            let parity = bs_call(100.0, k, r, s, t).unwrap() - bs_put(100.0, k, r, s, t).unwrap();
            assert!((parity - (100.0 - k * disc)).abs() < 1e-10);
        }
    }

    #[test]
    fn implied_vol_round_trip() {
        for &sigma in &[1e-4, 0.01, 0.3, 1.0, 5.0] {
            for &(k, t) in &[(100.0, 1.0), (100.0, 0.01), (90.0, 1.0), (110.0, 2.0)] {
                let c = bs_call(100.0, k, 0.02, sigma, t).unwrap();
                let lower = (100.0 - k * (-0.02 * t).exp()).max(0.0);
                // skip prices indistinguishable from the intrinsic value
                if c - lower < 1e-9 * 100.0 {
                    continue;
                }
                let q = implied_vol(c, 100.0, k, 0.02, t).unwrap();
                assert!((q.sigma_imp - sigma).abs() < 1e-8, "sigma {sigma} K {k} T {t}: {q:?}");
                assert!(q.solver_residual <= 1e-10 * 100.0);
            }
        }
        let q = implied_vol(bs_call(1.0, 2.0, 0.0, 0.3, 1.0).unwrap(), 1.0, 2.0, 0.0, 1.0).unwrap();
        assert!((q.sigma_imp - 0.3).abs() < 1e-8);
    }

    #[test]
    fn implied_vol_no_arbitrage() {
        assert!(matches!(implied_vol(100.0, 100.0, 100.0, 0.0, 1.0), Err(Error::NoArbViolation { .. })));
        assert!(matches!(implied_vol(15.0, 100.0, 90.0, 0.1, 1.0), Err(Error::NoArbViolation { .. })));
        // an extreme but well-conditioned quote still converges
        let c = bs_call(100.0, 200.0, 0.0, 0.05, 30.0).unwrap();
        assert!((implied_vol(c, 100.0, 200.0, 0.0, 30.0).unwrap().sigma_imp - 0.05).abs() < 1e-8);
    }

    #[test]
    fn step_rate_discount() {
        let t = 2.0;
        let rate = RateSpec::Step { breaks: vec![t / 2.0], rates: vec![0.05, 0.01] };
        rate.validate().unwrap();
        assert!((rate.discount(t) - (-0.03 * t).exp()).abs() < 1e-15);
        assert!((rate.integral(0.5) - 0.025).abs() < 1e-15);
        assert!(RateSpec::Step { breaks: vec![1.0], rates: vec![0.05] }.validate().is_err());
        let json = serde_json::to_string(&rate).unwrap();
        assert_eq!(serde_json::from_str::<RateSpec>(&json).unwrap(), rate);
        let c: RateSpec = serde_json::from_str(r#"{"constant":0.05}"#).unwrap();
        assert_eq!(c, RateSpec::Constant(0.05));
    }

    #[test]
    fn gbm_digitals_match_closed_form() {
        let m = ModelSpec::gbm(100.0, 0.05, 0.2).unwrap();
        let cfg = SimConfig::new(200_000, 11).with_scheme(Scheme::Exact);
        let t = 1e-4;
        let est = mc_digital(&m, 100.0, t, &RateSpec::Constant(0.05), &cfg).unwrap();
        let exact = bs_digital(100.0, 100.0, 0.05, 0.2, t).unwrap();
        assert!((exact - 0.500_595_910_210_388_7).abs() < 1e-12);
        assert!(est.ci_low <= exact && exact <= est.ci_high, "{est:?}");

        let itm = mc_digital(&m, 50.0, 1e-3, &RateSpec::Constant(0.05), &cfg).unwrap();
        let disc = (-0.05f64 * 1e-3).exp();
        assert!(itm.ci_low <= disc && disc <= itm.ci_high);

        let step = RateSpec::Step { breaks: vec![0.05], rates: vec![0.05, 0.01] };
        let est = mc_digital(&m, 100.0, 0.1, &step, &cfg).unwrap();
        let analytic = (-0.003f64).exp() * bs_digital(100.0, 100.0, 0.05, 0.2, 0.1).unwrap() / (-0.005f64).exp();
        assert!(est.ci_low <= analytic && analytic <= est.ci_high, "{est:?} {analytic}");
    }

    #[test]
    fn deterministic_rate_factorizes_on_the_same_sample() {
        let m = ModelSpec::gbm(100.0, 0.05, 0.2).unwrap();
        let cfg = SimConfig::new(20_000, 5).with_scheme(Scheme::Exact);
        let est = mc_digital(&m, 101.0, 0.2, &RateSpec::Constant(0.05), &cfg).unwrap();
        let sample = simulate_terminal(&m, 0.2, &cfg).unwrap();
        let p = prob_exceed(&sample, 0, 101.0, ATM_CONFIDENCE).unwrap();
        assert_eq!(est.price, (-0.05f64 * 0.2).exp() * p.p_hat);
    }

    #[test]
    fn log_coordinates_give_the_same_digital() {
        let m = ModelSpec::gbm(100.0, 0.05, 0.2).unwrap();
        let cfg = SimConfig::new(10_000, 5).with_scheme(Scheme::Exact);
        let a = mc_digital(&m, 101.0, 0.2, &RateSpec::Constant(0.05), &cfg).unwrap();
        let b = mc_digital(&m.in_log_coords().unwrap(), 101.0, 0.2, &RateSpec::Constant(0.05), &cfg).unwrap();
        assert!((a.prob.p_hat - b.prob.p_hat).abs() <= 2.0 / 10_000.0);
    }

    #[test]
    fn degenerate_and_out_of_scope_digitals() {
        let cfg = SimConfig::new(1000, 1).with_scheme(Scheme::Exact);
        let bessel = ModelSpec::squared_bessel(2.0, 0.0).unwrap();
        assert!(matches!(atm_digital_limit_check(&bessel, &[0.1, 0.01], &cfg), Err(Error::DegenerateLimit)));
        let poisson = ModelSpec::poisson_martingale(1.0).unwrap();
        assert!(atm_digital_limit_check(&poisson, &[0.1, 0.01], &cfg).is_err());
        let qd = ModelSpec::quantile_drift_bm(0.25).unwrap();
        assert!(atm_digital_limit_check(&qd, &[0.1, 0.01], &cfg).is_err());
    }

    #[test]
    fn bessel_atm_digital_keeps_gamma_tail() {
        let bessel = ModelSpec::squared_bessel(2.0, 0.0).unwrap();
        let cfg = SimConfig::new(100_000, 2).with_scheme(Scheme::Exact);
        let est = atm_digital_estimates(&bessel, &[1.0, 0.01], &cfg).unwrap();
        let target = (-1.0f64).exp();
        for e in &est {
            assert!(e.prob.ci_low <= target && target <= e.prob.ci_high, "{e:?}");
        }
    }

    #[test]
    fn heston_atm_digital_tends_to_one_half() {
        let heston =
            ModelSpec::heston(100.0, 0.04, HestonParams { r: 0.0, kappa: 1.5, theta: 0.04, xi: 0.3, rho: -0.7 })
                .unwrap();
        let t = [0.01, 0.001];
        let cfg = SimConfig::new(50_000, 3).with_max_step(1e-4);
        let r = atm_digital_limit_check(&heston, &t, &cfg).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn batch_csv() {
        let m = ModelSpec::gbm(100.0, 0.0, 0.2).unwrap();
        let batch: Vec<MarketParams> = serde_json::from_str(
            r#"[{"S0":100,"K":100,"T":0.1,"r":{"constant":0.0}},{"S0":50,"K":40,"T":0.2,"r":{"constant":0.02}}]"#,
        )
        .unwrap();
        let rows = price_digital_batch(&m, &batch, &SimConfig::new(2000, 1).with_scheme(Scheme::Exact)).unwrap();
        let mut buf = Vec::new();
        write_price_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("K,T,price,ci_low,ci_high\n"));
        assert_eq!(text.lines().count(), 3);
        assert!(rows[1].price > 0.8);
    }
}
