//! At-the-money implied volatility slope and its envelopes.
//!
//! Writing `A = sqrt(2 pi) / (S0 sqrt(T))` and `C = sqrt(ln 2 / 2) c` with `c`
//! the drift bound of the log price, the slope `d sigma_imp / dK` at `K = S0`
//! satisfies, up to `O(T)` and `O((sigma_imp sqrt(T))^3)` terms,
//!
//! ```text
//! A (-C sqrt(T) - sigma_imp sqrt(T) / (2 sqrt(2 pi))) <= slope
//!     <= A (C sqrt(T) - sigma_imp sqrt(T) / (2 sqrt(2 pi)))
//! ```
//!
//! a band of width `O(1)`, to be compared with the model-free band of width
//! `O(T^{-1/2})`. The dropped terms are reported separately as a budget.

use std::f64::consts::{LN_2, PI};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bounds::{drift_bound_for_model, DriftDiffusionBound};
use crate::error::{Error, Result};
use crate::models::{check_assumptions, Coordinates, ItemStatus, ModelSpec};
use crate::pricing::{bs_call, bs_d, implied_vol};
use crate::simulate::{simulate_terminal, SimConfig};
use crate::stats::{self, normal_cdf};

/// Standard errors of slack in the statistical verdicts.
pub const SLOPE_SE_MULTIPLIER: f64 = 3.0;
/// Allowed relative deviation of `width ratio / sqrt(T)` across maturities.
pub const WIDTH_RATIO_TOLERANCE: f64 = 0.10;

/// Source of European call prices.
#[derive(Debug, Clone, Copy)]
pub enum CallPricer<'a> {
    /// Closed-form prices of a flat-volatility market.
    BlackScholes { s0: f64, r: f64, sigma: f64 },
    /// Monte Carlo prices from one terminal sample shared by all strikes.
    MonteCarlo { model: &'a ModelSpec, cfg: &'a SimConfig },
}

/// Call prices at a set of strikes, with per-path discounted payoffs for
/// Monte Carlo prices.
#[derive(Debug, Clone)]
struct CallQuotes {
    prices: Vec<f64>,
    payoffs: Option<Vec<Vec<f64>>>,
}

impl CallPricer<'_> {
    pub fn spot(&self) -> f64 {
        match self {
            CallPricer::BlackScholes { s0, .. } => *s0,
            CallPricer::MonteCarlo { model, .. } => model.spot(),
        }
    }

    pub fn rate(&self) -> f64 {
        match self {
            CallPricer::BlackScholes { r, .. } => *r,
            CallPricer::MonteCarlo { model, .. } => model.rate(),
        }
    }

    /// Drift bound of the log price when the model is within the scope of the
    /// CLT slope band, `None` otherwise.
    pub fn slope_bound(&self) -> Option<DriftDiffusionBound> {
        match self {
            CallPricer::BlackScholes { r, sigma, .. } => {
                DriftDiffusionBound::new((r - 0.5 * sigma * sigma).abs() / sigma).ok()
            }
            CallPricer::MonteCarlo { model, .. } => {
                if check_assumptions(model, 1.0).slope_bound_scope == ItemStatus::Holds {
                    drift_bound_for_model(model).ok()
                } else {
                    None
                }
            }
        }
    }

    fn quotes(&self, strikes: &[f64], t: f64) -> Result<CallQuotes> {
        match *self {
            CallPricer::BlackScholes { s0, r, sigma } => Ok(CallQuotes {
                prices: strikes.iter().map(|&k| bs_call(s0, k, r, sigma, t)).collect::<Result<_>>()?,
                payoffs: None,
            }),
            CallPricer::MonteCarlo { model, cfg } => {
                let sample = simulate_terminal(model, t, cfg)?;
                let disc = (-model.rate() * t).exp();
                let spots: Vec<f64> = sample
                    .rows()
                    .map(|r| match model.coords() {
                        Coordinates::Price => r[0],
                        Coordinates::Log => r[0].exp(),
                    })
                    .collect();
                let payoffs: Vec<Vec<f64>> =
                    strikes.iter().map(|&k| spots.iter().map(|&s| disc * (s - k).max(0.0)).collect()).collect();
                Ok(CallQuotes { prices: payoffs.iter().map(|p| stats::mean(p)).collect(), payoffs: Some(payoffs) })
            }
        }
    }
}

/// `dK = S0 max(1e-3, sigma_imp sqrt(T) / 10)`.
pub fn default_strike_step(s0: f64, sigma_imp: f64, t: f64) -> f64 {
    s0 * (1e-3f64).max(sigma_imp * t.sqrt() / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeEstimate {
    #[serde(rename = "T")]
    pub t: f64,
    pub dk: f64,
    pub sigma_imp_atm: f64,
    pub slope: f64,
    /// Linearized standard error; zero for closed-form prices.
    pub slope_se: f64,
}

fn implied(pricer: &CallPricer<'_>, price: f64, se: f64, k: f64, t: f64) -> Result<f64> {
    let (s0, r) = (pricer.spot(), pricer.rate());
    implied_vol(price, s0, k, r, t).map(|q| q.sigma_imp).map_err(|e| match e {
        Error::NoArbViolation { .. } | Error::VolBracket { .. } if se > 0.0 => Error::StatisticalFailure(format!(
            "Monte Carlo call price {price} (se {se}) at K = {k} has no implied volatility"
        )),
        e => e,
    })
}

/// Central difference `(sigma_imp(S0 + dK) - sigma_imp(S0 - dK)) / (2 dK)`.
/// Monte Carlo prices at all three strikes come from the same sample.
pub fn atm_slope(pricer: &CallPricer<'_>, t: f64, dk: Option<f64>) -> Result<SlopeEstimate> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("maturity must be positive, got {t}")));
    }
    let s0 = pricer.spot();
    let r = pricer.rate();
    let moneyness = |dk: f64| [s0 - dk, s0, s0 + dk];

    // the ATM vol fixes the default step, so price ATM first when needed
    let (dk, quotes) = match dk {
        Some(dk) if dk > 0.0 && dk < s0 => (dk, pricer.quotes(&moneyness(dk), t)?),
        Some(dk) => return Err(Error::Domain(format!("strike step must lie in (0, S0), got {dk}"))),
        None => {
            let atm = pricer.quotes(&[s0], t)?;
            let atm_se = atm.payoffs.as_ref().map_or(0.0, |p| stats::std_error(&p[0]));
            let sigma = implied(pricer, atm.prices[0], atm_se, s0, t)?;
            let dk = default_strike_step(s0, sigma, t);
            (dk, pricer.quotes(&moneyness(dk), t)?)
        }
    };
    let strikes = moneyness(dk);
    let ses: Vec<f64> = match &quotes.payoffs {
        Some(p) => p.iter().map(|x| stats::std_error(x)).collect(),
        None => vec![0.0; 3],
    };
    let vols: Vec<f64> =
        (0..3).map(|i| implied(pricer, quotes.prices[i], ses[i], strikes[i], t)).collect::<Result<_>>()?;
    let slope = (vols[2] - vols[0]) / (2.0 * dk);

    let slope_se = match &quotes.payoffs {
        None => 0.0,
        Some(p) => {
            // d sigma = d C / vega at each strike; paired over paths
            let vega = |k: f64, s: f64| crate::pricing::bs_vega(s0, k, r, s, t);
            let (v_lo, v_hi) = (vega(strikes[0], vols[0])?, vega(strikes[2], vols[2])?);
            let contrib: Vec<f64> =
                p[2].iter().zip(&p[0]).map(|(hi, lo)| (hi / v_hi - lo / v_lo) / (2.0 * dk)).collect();
            stats::std_error(&contrib)
        }
    };
    Ok(SlopeEstimate { t, dk, sigma_imp_atm: vols[1], slope, slope_se })
}

/// `sqrt(ln 2 / 2) c`.
pub fn slope_constant(bound: DriftDiffusionBound) -> f64 {
    (0.5 * LN_2).sqrt() * bound.c()
}

fn prefactor(s0: f64, t: f64) -> f64 {
    (2.0 * PI).sqrt() / (s0 * t.sqrt())
}

/// Leading-order CLT band `(lower, upper)` for the ATM slope.
pub fn clt_slope_bounds(bound: DriftDiffusionBound, sigma_imp_atm: f64, s0: f64, t: f64) -> (f64, f64) {
    let a = prefactor(s0, t);
    let c = slope_constant(bound) * t.sqrt();
    let shift = sigma_imp_atm * t.sqrt() / (2.0 * (2.0 * PI).sqrt());
    (a * (-c - shift), a * (c - shift))
}

/// Envelope for the dropped terms: `A (2 max(r, sigma^2) T + (sigma sqrt(T))^3)`.
pub fn remainder_budget(s0: f64, r: f64, sigma_imp_atm: f64, t: f64) -> f64 {
    let a = prefactor(s0, t);
    a * (2.0 * r.max(sigma_imp_atm * sigma_imp_atm) * t + (sigma_imp_atm * t.sqrt()).powi(3))
}

/// Model-free band `(-A (1 - Phi(d2)) e^{-rT + d1^2/2}, A Phi(d2) e^{-rT + d1^2/2})`.
pub fn model_free_slope_bounds(s0: f64, k: f64, r: f64, t: f64, sigma_imp: f64) -> (f64, f64) {
    let (d1, d2) = bs_d(s0, k, r, sigma_imp, t);
    let scale = prefactor(s0, t) * (-r * t + 0.5 * d1 * d1).exp();
    (-scale * normal_cdf(-d2), scale * normal_cdf(d2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandVerdict {
    Pass,
    Fail,
    NotApplicable,
}

impl BandVerdict {
    fn from_bool(b: bool) -> Self {
        if b {
            BandVerdict::Pass
        } else {
            BandVerdict::Fail
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            BandVerdict::Pass => "pass",
            BandVerdict::Fail => "fail",
            BandVerdict::NotApplicable => "n/a",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkewVerdicts {
    pub model_free: BandVerdict,
    pub clt: BandVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkewReport {
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "S0")]
    pub s0: f64,
    pub slope_est: f64,
    pub slope_se: f64,
    pub sigma_imp_atm: f64,
    /// Drift bound of the log price, when in scope.
    pub c: Option<f64>,
    /// `sqrt(ln 2 / 2) c`.
    #[serde(rename = "C")]
    pub big_c: Option<f64>,
    pub clt_lower: Option<f64>,
    pub clt_upper: Option<f64>,
    /// Engineering envelope for the dropped remainders, never folded into
    /// the CLT band itself.
    pub budget: f64,
    pub mf_lower: f64,
    pub mf_upper: f64,
    pub verdicts: SkewVerdicts,
}

impl SkewReport {
    pub fn clt_width(&self) -> Option<f64> {
        Some(self.clt_upper? - self.clt_lower?)
    }

    pub fn mf_width(&self) -> f64 {
        self.mf_upper - self.mf_lower
    }
}

/// Slope estimate plus both bands and their verdicts at maturity `t`.
pub fn skew_report(pricer: &CallPricer<'_>, t: f64, dk: Option<f64>) -> Result<SkewReport> {
    let est = atm_slope(pricer, t, dk)?;
    let s0 = pricer.spot();
    let r = pricer.rate();
    let bound = pricer.slope_bound();
    let (clt_lower, clt_upper) = match bound {
        Some(b) => {
            let (lo, hi) = clt_slope_bounds(b, est.sigma_imp_atm, s0, t);
            (Some(lo), Some(hi))
        }
        None => (None, None),
    };
    let (mf_lower, mf_upper) = model_free_slope_bounds(s0, s0, r, t, est.sigma_imp_atm);
    let mut report = SkewReport {
        t,
        s0,
        slope_est: est.slope,
        slope_se: est.slope_se,
        sigma_imp_atm: est.sigma_imp_atm,
        c: bound.map(DriftDiffusionBound::c),
        big_c: bound.map(slope_constant),
        clt_lower,
        clt_upper,
        budget: remainder_budget(s0, r, est.sigma_imp_atm, t),
        mf_lower,
        mf_upper,
        verdicts: SkewVerdicts { model_free: BandVerdict::NotApplicable, clt: BandVerdict::NotApplicable },
    };
    report.verdicts = compare_bounds(&report);
    Ok(report)
}

/// (a) the slope lies in the model-free band within `3 se`; (b) it lies in
/// the CLT band widened by the budget and `3 se`, when the model is in scope.
pub fn compare_bounds(report: &SkewReport) -> SkewVerdicts {
    let slack = SLOPE_SE_MULTIPLIER * report.slope_se;
    let s = report.slope_est;
    let model_free = BandVerdict::from_bool(report.mf_lower - slack <= s && s <= report.mf_upper + slack);
    let clt = match (report.clt_lower, report.clt_upper) {
        (Some(lo), Some(hi)) => {
            let pad = slack + report.budget;
            BandVerdict::from_bool(lo - pad <= s && s <= hi + pad)
        }
        _ => BandVerdict::NotApplicable,
    };
    SkewVerdicts { model_free, clt }
}

/// Width ratio `width(clt) / width(mf)` along a maturity schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthRatioCheck {
    pub t: Vec<f64>,
    pub ratio: Vec<f64>,
    /// `ratio / sqrt(T)`.
    pub normalized: Vec<f64>,
    /// Largest relative deviation of `normalized` from its value at the
    /// smallest maturity.
    pub max_deviation: f64,
    pub decreasing: bool,
    pub pass: bool,
}

/// Checks that the width ratio vanishes like `sqrt(T)`: it must decrease as
/// `T` decreases, with `ratio / sqrt(T)` constant within 10%.
pub fn width_ratio_check(reports: &[SkewReport]) -> Result<WidthRatioCheck> {
    let mut rows: Vec<(f64, f64)> = reports
        .iter()
        .map(|r| {
            r.clt_width()
                .map(|w| (r.t, w / r.mf_width()))
                .ok_or_else(|| Error::OutOfScope("width ratio needs the CLT band".into()))
        })
        .collect::<Result<_>>()?;
    if rows.len() < 2 {
        return Err(Error::InvalidConfig("width ratio needs at least two maturities".into()));
    }
    rows.sort_by(|a, b| b.0.total_cmp(&a.0));
    let t: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let ratio: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let normalized: Vec<f64> = rows.iter().map(|(t, q)| q / t.sqrt()).collect();
    let reference = *normalized.last().expect("two or more rows");
    let max_deviation = normalized.iter().map(|v| (v / reference - 1.0).abs()).fold(0.0, f64::max);
    let decreasing = ratio.windows(2).all(|w| w[1] < w[0]);
    Ok(WidthRatioCheck {
        t,
        ratio,
        normalized,
        max_deviation,
        decreasing,
        pass: decreasing && max_deviation <= WIDTH_RATIO_TOLERANCE,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV with columns `T, slope_est, slope_se, clt_lower, clt_upper, budget,
/// mf_lower, mf_upper, verdicts`.
pub fn write_skew_csv<W: Write>(reports: &[SkewReport], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "T",
        "slope_est",
        "slope_se",
        "clt_lower",
        "clt_upper",
        "budget",
        "mf_lower",
        "mf_upper",
        "verdicts",
    ])?;
    for r in reports {
        w.write_record([
            r.t.to_string(),
            r.slope_est.to_string(),
            r.slope_se.to_string(),
            opt(r.clt_lower),
            opt(r.clt_upper),
            r.budget.to_string(),
            r.mf_lower.to_string(),
            r.mf_upper.to_string(),
            format!("mf={};clt={}", r.verdicts.model_free.as_str(), r.verdicts.clt.as_str()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::HestonParams;
    use crate::simulate::Scheme;
    use proptest::prelude::*;

    fn b(c: f64) -> DriftDiffusionBound {
        DriftDiffusionBound::new(c).unwrap()
    }

    #[test]
    fn clt_band_reference_values() {
        assert!((slope_constant(b(0.15)) - 0.088_305_751_688_660_6).abs() < 1e-15);
        let (lo, hi) = clt_slope_bounds(b(0.15), 0.2, 100.0, 0.01);
        assert!((hi - 0.001_213_496_939_953_408_8).abs() < 1e-15);
        assert!((lo + 0.003_213_496_939_953_408_8).abs() < 1e-15);
        let (lo0, hi0) = clt_slope_bounds(b(0.0), 0.2, 100.0, 0.3);
        assert_eq!(lo0, hi0);
        assert!((lo0 + 0.2 / 200.0).abs() < 1e-15);
        let (lo2, hi2) = clt_slope_bounds(b(0.15), 0.2, 100.0, 1e-4);
        assert!((lo2 - lo).abs() < 1e-15 && (hi2 - hi).abs() < 1e-15);
    }

    #[test]
    fn model_free_reference_values() {
        let (lo, hi) = model_free_slope_bounds(100.0, 100.0, 0.05, 0.01, 0.2);
        assert!((lo + 0.123_845_401_803_674_76).abs() < 1e-12);
        assert!((hi - 0.126_845_626_813_800_08).abs() < 1e-12);
        let (lo, hi) = model_free_slope_bounds(100.0, 100.0, 0.0, 1e-6, 1e-3);
        let a = prefactor(100.0, 1e-6);
        assert!((hi / (0.5 * a) - 1.0).abs() < 1e-6 && (lo / (-0.5 * a) - 1.0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn band_invariants(c in 0.0f64..3.0, sig in 0.01f64..2.0, t in 1e-6f64..2.0, lambda in 0.1f64..10.0,
                           k in 50.0f64..150.0, r in -0.05f64..0.1) {
            let (lo, hi) = clt_slope_bounds(b(c), sig, 100.0, t);
            prop_assert!(lo <= hi);
            prop_assert_eq!(lo == hi, c == 0.0);
            // (c, T) -> (lambda c, T / lambda^2) with sigma sqrt(T) held fixed
            let t2 = t / (lambda * lambda);
            let (lo2, hi2) = clt_slope_bounds(b(lambda * c), sig * lambda, 100.0, t2);
            let scale = prefactor(100.0, t) / prefactor(100.0, t2);
            prop_assert!((lo2 * scale - lo).abs() <= 1e-10 * lo.abs().max(1e-3));
            prop_assert!((hi2 * scale - hi).abs() <= 1e-10 * hi.abs().max(1e-3));
            let (mlo, mhi) = model_free_slope_bounds(100.0, k, r, t, sig);
            prop_assert!(mlo <= mhi);
            let p = normal_cdf(bs_d(100.0, k, r, sig, t).1);
            if p > 0.0 && p < 1.0 {
                prop_assert!(mlo < 0.0 && mhi > 0.0);
            }
        }
    }

    #[test]
    fn model_free_band_reproduced_from_round_trip_vol() {
        let s =
            implied_vol(bs_call(100.0, 100.0, 0.05, 0.2, 0.01).unwrap(), 100.0, 100.0, 0.05, 0.01).unwrap().sigma_imp;
        let a = model_free_slope_bounds(100.0, 100.0, 0.05, 0.01, s);
        let b = model_free_slope_bounds(100.0, 100.0, 0.05, 0.01, 0.2);
        assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9);
    }

    #[test]
    fn analytic_gbm_slope_and_verdicts() {
        let pricer = CallPricer::BlackScholes { s0: 100.0, r: 0.05, sigma: 0.2 };
        let mut reports = Vec::new();
        for k in 2..=10 {
            let t = 2f64.powi(-k);
            let r = skew_report(&pricer, t, None).unwrap();
            assert!(r.slope_est.abs() < 1e-6, "T={t}: {}", r.slope_est);
            assert_eq!(r.verdicts.model_free, BandVerdict::Pass);
            assert_eq!(r.verdicts.clt, BandVerdict::Pass);
            assert!((r.c.unwrap() - 0.15).abs() < 1e-15);
            reports.push(r);
        }
        let w = width_ratio_check(&reports).unwrap();
        assert!(w.pass, "{w:?}");
        let three: Vec<SkewReport> =
            [0.25, 0.0625, 0.015625].iter().map(|&t| skew_report(&pricer, t, None).unwrap()).collect();
        let w = width_ratio_check(&three).unwrap();
        for pair in w.ratio.windows(2) {
            assert!((pair[0] / pair[1] - 2.0).abs() < 0.05);
        }
    }

    #[test]
    fn mc_gbm_slope_is_flat_within_noise() {
        let m = ModelSpec::gbm(100.0, 0.05, 0.2).unwrap();
        let cfg = SimConfig::new(200_000, 17).with_scheme(Scheme::Exact);
        let r = skew_report(&CallPricer::MonteCarlo { model: &m, cfg: &cfg }, 0.05, None).unwrap();
        assert!(r.slope_se > 0.0);
        assert!(r.slope_est.abs() <= 3.0 * r.slope_se, "{r:?}");
        assert_eq!(r.verdicts.clt, BandVerdict::Pass);
    }

    #[test]
    fn mc_heston_negative_correlation_gives_negative_slope() {
        let h = ModelSpec::heston(100.0, 0.04, HestonParams { r: 0.0, kappa: 1.5, theta: 0.04, xi: 0.5, rho: -0.7 })
            .unwrap();
        let cfg = SimConfig::new(200_000, 19).with_max_step(0.002);
        let r = skew_report(&CallPricer::MonteCarlo { model: &h, cfg: &cfg }, 0.1, None).unwrap();
        assert!(r.slope_est < -3.0 * r.slope_se, "{r:?}");
        assert_eq!(r.verdicts.clt, BandVerdict::NotApplicable);
        assert!(r.clt_lower.is_none());
    }

    #[test]
    fn csv_header() {
        let pricer = CallPricer::BlackScholes { s0: 100.0, r: 0.0, sigma: 0.2 };
        let reports = vec![skew_report(&pricer, 0.1, None).unwrap()];
        let mut buf = Vec::new();
        write_skew_csv(&reports, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("T,slope_est,slope_se,clt_lower,clt_upper,budget,mf_lower,mf_upper,verdicts\n"));
        assert!(text.contains("mf=pass;clt=pass"));
    }

    #[test]
    fn strike_step_rule() {
        assert_eq!(default_strike_step(100.0, 0.2, 1e-6), 0.1);
        assert!((default_strike_step(100.0, 0.2, 1.0) - 2.0).abs() < 1e-12);
        let pricer = CallPricer::BlackScholes { s0: 100.0, r: 0.0, sigma: 0.2 };
        assert!(atm_slope(&pricer, 0.1, Some(150.0)).is_err());
    }
}
