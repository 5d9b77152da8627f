//! Per-command parameters and report generation.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::grid::Grid;
use super::RunConfig;
use crate::bounds::{self, DriftDiffusionBound, BOUND_TOLERANCE};
use crate::clt::{self, Mapping, Verdict};
use crate::error::{Error, Result};
use crate::models::{Dynamics, ModelSpec};
use crate::pricing::{self, MarketParams, RateSpec};
use crate::simulate::derive_seed;
use crate::skew::{self, BandVerdict, CallPricer};
use crate::stats::{gamma_cdf, normal_quantile};

/// A named output file, held in memory until the run completes.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: Vec<u8>,
}

fn csv_artifact(name: &str, write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Artifact> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(Artifact { name: name.into(), contents: buf })
}

fn json_artifact<T: Serialize>(name: &str, value: &T) -> Result<Artifact> {
    let mut contents = serde_json::to_vec_pretty(value)?;
    contents.push(b'\n');
    Ok(Artifact { name: name.into(), contents })
}

fn params<P: DeserializeOwned + Default>(config: &RunConfig) -> Result<P> {
    match &config.params {
        Value::Null => Ok(P::default()),
        v => serde_json::from_value(v.clone())
            .map_err(|e| Error::InvalidConfig(format!("{} params: {e}", config.command))),
    }
}

fn require_model(config: &RunConfig) -> Result<&ModelSpec> {
    config.model.as_ref().ok_or_else(|| Error::InvalidConfig(format!("{} needs a model", config.command)))
}

fn parse_mapping(s: &str) -> Result<Mapping> {
    let s = s.trim();
    if s.starts_with('{') || s.starts_with('"') {
        return Ok(serde_json::from_str(s)?);
    }
    match s {
        "identity" => Ok(Mapping::Identity),
        "log" => Ok(Mapping::Log),
        "log-price" => Ok(Mapping::log_price()),
        "square" => Ok(Mapping::Square),
        _ => match s.strip_prefix("coordinate:") {
            Some(i) => i
                .parse()
                .map(Mapping::Coordinate)
                .map_err(|_| Error::InvalidConfig(format!("bad coordinate index in `{s}`"))),
            None => Err(Error::InvalidConfig(format!(
                "unknown mapping `{s}`; use identity, log, log-price, square, coordinate:<i> or JSON"
            ))),
        },
    }
}

pub fn dispatch(config: &RunConfig) -> Result<super::RunOutcome> {
    match config.command.as_str() {
        "clt-check" => clt_check(config),
        "fclt-check" => fclt_check(config),
        "bounds" => bounds_cmd(config),
        "digital" => digital(config),
        "skew" => skew_cmd(config),
        "ldp" => ldp(config),
        "examples" => examples(config),
        other => Err(Error::InvalidConfig(format!("unknown command `{other}`"))),
    }
}

fn outcome(pass: bool, artifacts: Vec<Artifact>, summary: String) -> Result<super::RunOutcome> {
    Ok(super::RunOutcome { pass, artifacts, summary })
}

fn verdict_word(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

// ---------------------------------------------------------------- clt-check

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CltParams {
    /// identity, log, log-price, square, coordinate:<i>, or a JSON mapping.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mapping: Option<String>,
    /// Strictly decreasing times.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_schedule: Option<Grid>,
    /// Verdict the run must produce: consistent, inconsistent or degenerate.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_verdict: Option<Verdict>,
}

fn clt_check(config: &RunConfig) -> Result<super::RunOutcome> {
    let p: CltParams = params(config)?;
    let model = require_model(config)?;
    let mapping = parse_mapping(p.mapping.as_deref().unwrap_or("identity"))?;
    let schedule = p.t_schedule.map(|g| g.0).unwrap_or_else(|| clt::DEFAULT_T_SCHEDULE.to_vec());
    let cfg = config.sim.to_config(clt::DEFAULT_PATHS)?;
    let expect = p.expect_verdict.unwrap_or(Verdict::Consistent);
    let report = clt::clt_check(model, &mapping, &schedule, &cfg)?;
    let pass = report.verdict == expect;
    let artifacts = vec![
        csv_artifact("clt.csv", |w| report.write_csv(w))?,
        json_artifact("clt.json", &json!({ "expect_verdict": expect, "pass": pass, "report": report }))?,
    ];
    let summary = format!(
        "clt-check {} {}: verdict {:?} (expected {:?}) {}",
        model.kind(),
        mapping.name(),
        report.verdict,
        expect,
        verdict_word(pass)
    );
    outcome(pass, artifacts, summary)
}

// ---------------------------------------------------------------- fclt-check

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FcltParams {
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mapping: Option<String>,
    /// Strictly decreasing time scales in (0, 1).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_schedule: Option<Grid>,
    /// Positive, increasing rescaled times.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Grid>,
}

fn fclt_check(config: &RunConfig) -> Result<super::RunOutcome> {
    let p: FcltParams = params(config)?;
    let model = require_model(config)?;
    let mapping = parse_mapping(p.mapping.as_deref().unwrap_or("identity"))?;
    let u = p.u_schedule.map(|g| g.0).unwrap_or_else(|| vec![1e-2, 1e-4]);
    let t_grid = p.t_grid.map(|g| g.0).unwrap_or_else(|| (1..=8).map(|k| k as f64 / 8.0).collect());
    let cfg = config.sim.to_config(10_000)?;
    let report = clt::fclt_check(model, &mapping, &u, &t_grid, &cfg)?;
    let artifacts = vec![csv_artifact("fclt.csv", |w| report.write_csv(w))?, json_artifact("fclt.json", &report)?];
    let summary = format!(
        "fclt-check {} {}: {} scales, {}",
        model.kind(),
        mapping.name(),
        report.cells.len(),
        verdict_word(report.pass)
    );
    outcome(report.pass, artifacts, summary)
}

// ---------------------------------------------------------------- bounds

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsParams {
    /// Drift bound; taken from the model when omitted.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Grid>,
    /// Check P(X_t > X_0) against the envelope (default when a model is set).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<bool>,
}

const EXPANSION_GROWTH: f64 = 1.1;

#[derive(Debug, Serialize)]
struct ExpansionRow {
    t: f64,
    ratio_lower: f64,
    ratio_upper: f64,
}

fn bounds_cmd(config: &RunConfig) -> Result<super::RunOutcome> {
    let p: BoundsParams = params(config)?;
    let bound = match (p.c, &config.model) {
        (Some(c), _) => DriftDiffusionBound::new(c)?,
        (None, Some(m)) => bounds::drift_bound_for_model(m)?,
        (None, None) => return Err(Error::InvalidConfig("bounds needs `c` or a model".into())),
    };
    let t_grid = match p.t_grid {
        Some(g) => g.0,
        None => super::parse_grid("1e-6:1:log:20").map_err(Error::InvalidConfig)?,
    };
    let curve = bounds::girsanov_bounds(bound, &t_grid)?;
    let structure =
        curve.e_f1.iter().zip(&curve.e_f2).all(|(lo, hi)| *lo <= 0.5 + BOUND_TOLERANCE && 0.5 <= hi + BOUND_TOLERANCE);

    let limit = bound.horizon().min(1.0);
    let exp_t: Vec<f64> = t_grid.iter().copied().filter(|&t| t < limit).collect();
    let exp_rows: Vec<ExpansionRow> = if exp_t.is_empty() {
        Vec::new()
    } else {
        exp_t
            .iter()
            .zip(bounds::expansion_error(bound, &exp_t)?)
            .map(|(&t, (lo, hi))| ExpansionRow { t, ratio_lower: lo, ratio_upper: hi })
            .collect()
    };

    // no growth of the remainder ratio as t decreases
    let side_max = |r: &ExpansionRow| r.ratio_lower.max(r.ratio_upper);
    let expansion_bounded = match (
        exp_rows.iter().min_by(|a, b| a.t.total_cmp(&b.t)),
        exp_rows.iter().max_by(|a, b| a.t.total_cmp(&b.t)),
    ) {
        (Some(lo), Some(hi)) if exp_rows.len() >= 2 => side_max(lo) <= EXPANSION_GROWTH * side_max(hi),
        _ => true,
    };

    let verify = p.verify.unwrap_or(config.model.is_some());
    let bracketing = match (&config.model, verify) {
        (Some(m), true) => {
            let cfg = config.sim.to_config(100_000)?;
            Some(bounds::verify_bracketing(m, &t_grid, &cfg)?)
        }
        (None, true) => return Err(Error::InvalidConfig("verification needs a model".into())),
        _ => None,
    };
    let pass = structure && expansion_bounded && bracketing.as_ref().is_none_or(|b| b.pass());

    let mut artifacts = vec![
        csv_artifact("bounds.csv", |w| curve.write_csv(w))?,
        csv_artifact("expansion.csv", |w| {
            let mut cw = csv::WriterBuilder::new().has_headers(false).from_writer(w);
            cw.write_record(["t", "ratio_lower", "ratio_upper"])?;
            for r in &exp_rows {
                cw.serialize(r)?;
            }
            cw.flush()?;
            Ok(())
        })?,
    ];
    if let Some(b) = &bracketing {
        artifacts.push(csv_artifact("bracketing.csv", |w| b.write_csv(w))?);
    }
    artifacts.push(json_artifact(
        "bounds.json",
        &json!({
            "curve": curve,
            "remainder_limit": bound.remainder_limit(),
            "structure_holds": structure,
            "expansion_bounded": expansion_bounded,
            "bracketing": bracketing,
            "pass": pass,
        }),
    )?);
    let mut summary = format!(
        "bounds c = {}: {} points, structure {}, expansion {}",
        bound.c(),
        t_grid.len(),
        verdict_word(structure),
        verdict_word(expansion_bounded)
    );
    if let Some(b) = &bracketing {
        let _ = write!(summary, ", bracketing {}", verdict_word(b.pass()));
    }
    outcome(pass, artifacts, summary)
}

// ---------------------------------------------------------------- digital

/// A rate given as a number (constant) or as a [`RateSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RateArg {
    Constant(f64),
    Spec(RateSpec),
}

impl RateArg {
    fn spec(&self) -> RateSpec {
        match self {
            RateArg::Constant(r) => RateSpec::Constant(*r),
            RateArg::Spec(s) => s.clone(),
        }
    }
}

impl std::str::FromStr for RateArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().parse::<f64>() {
            Ok(r) => Ok(RateArg::Constant(r)),
            Err(_) => serde_json::from_str(s).map_err(|e| format!("bad rate `{s}`: {e}")),
        }
    }
}

/// Target probability for ATM estimates: a number, or `exact` for the
/// model's closed form at each maturity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExpectArg {
    Value(f64),
    Keyword(String),
}

impl std::str::FromStr for ExpectArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.trim().parse::<f64>() {
            Ok(v) => ExpectArg::Value(v),
            Err(_) => ExpectArg::Keyword(s.trim().to_string()),
        })
    }
}

/// `P(X_t > atm_level(t))` in closed form for the models where it is known.
pub fn exact_atm_probability(model: &ModelSpec, t: f64) -> Option<f64> {
    match *model.dynamics() {
        Dynamics::QuantileDriftBm { p, .. } => Some(p),
        Dynamics::PoissonMartingale { rate } => Some((-rate * t).exp()),
        Dynamics::SquaredBessel { delta } if model.x0()[0] == 0.0 => {
            gamma_cdf(delta, 0.5 * delta, 2.0).ok().map(|c| 1.0 - c)
        }
        _ => bounds::exact_exceedance(model, t),
    }
}

impl ExpectArg {
    fn target(&self, model: &ModelSpec, t: f64) -> Result<f64> {
        match self {
            ExpectArg::Value(v) => Ok(*v),
            ExpectArg::Keyword(k) if k == "exact" => exact_atm_probability(model, t)
                .ok_or_else(|| Error::UnsupportedModel(format!("no closed-form ATM probability for {}", model.kind()))),
            ExpectArg::Keyword(k) => {
                Err(Error::InvalidConfig(format!("expect must be a number or `exact`, got `{k}`")))
            }
        }
    }
}

/// A batch of market parameters, inline or as a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BatchArg {
    Inline(Vec<MarketParams>),
    File(PathBuf),
}

impl std::str::FromStr for BatchArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(BatchArg::File(PathBuf::from(s)))
    }
}

impl BatchArg {
    fn load(&self) -> Result<Vec<MarketParams>> {
        match self {
            BatchArg::Inline(v) => Ok(v.clone()),
            BatchArg::File(p) => Ok(serde_json::from_str(&std::fs::read_to_string(p)?)?),
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DigitalParams {
    /// Maturities; ATM checks need them strictly decreasing.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maturities: Option<Grid>,
    /// Fixed strike (price units); ATM when omitted.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strike: Option<f64>,
    /// Discount rate for fixed-strike prices: a number or a JSON rate spec.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateArg>,
    /// ATM probability every interval must contain, a number or `exact`.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<ExpectArg>,
    /// JSON file with a list of {"S0", "K", "T", "r"} entries.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch: Option<BatchArg>,
}

#[derive(Debug, Serialize)]
struct ExpectRow {
    #[serde(rename = "T")]
    t: f64,
    level: f64,
    p_hat: f64,
    ci_low: f64,
    ci_high: f64,
    target: f64,
    pass: bool,
}

fn digital(config: &RunConfig) -> Result<super::RunOutcome> {
    let p: DigitalParams = params(config)?;
    let model = require_model(config)?;
    let cfg = config.sim.to_config(100_000)?;
    let maturities = p.maturities.map(|g| g.0).unwrap_or_else(|| vec![1e-1, 1e-2, 1e-3]);

    if let Some(batch) = &p.batch {
        let rows = pricing::price_digital_batch(model, &batch.load()?, &cfg)?;
        let artifacts = vec![
            csv_artifact("digital.csv", |w| pricing::write_price_csv(&rows, w))?,
            json_artifact("digital.json", &json!({ "mode": "batch", "estimates": rows, "pass": true }))?,
        ];
        return outcome(true, artifacts, format!("digital batch: {} prices", rows.len()));
    }

    if let Some(k) = p.strike {
        let rate = p.rate.as_ref().map(RateArg::spec).unwrap_or(RateSpec::Constant(model.rate()));
        let rows = maturities
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                pricing::mc_digital(model, k, t, &rate, &cfg.clone().with_seed(derive_seed(cfg.seed, i as u64)))
            })
            .collect::<Result<Vec<_>>>()?;
        let artifacts = vec![
            csv_artifact("digital.csv", |w| pricing::write_price_csv(&rows, w))?,
            json_artifact("digital.json", &json!({ "mode": "strike", "rate": rate, "estimates": rows, "pass": true }))?,
        ];
        return outcome(true, artifacts, format!("digital K = {k}: {} maturities", rows.len()));
    }

    if let Some(expect) = &p.expect {
        let rows = pricing::atm_digital_estimates(model, &maturities, &cfg)?;
        let checks = rows
            .iter()
            .map(|e| {
                let target = expect.target(model, e.t)?;
                Ok(ExpectRow {
                    t: e.t,
                    level: model.atm_level(e.t),
                    p_hat: e.prob.p_hat,
                    ci_low: e.prob.ci_low,
                    ci_high: e.prob.ci_high,
                    target,
                    pass: e.prob.contains(target),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let pass = checks.iter().all(|c| c.pass);
        let artifacts = vec![
            csv_artifact("digital.csv", |w| pricing::write_price_csv(&rows, w))?,
            csv_artifact("expect.csv", |w| {
                let mut cw = csv::Writer::from_writer(w);
                for c in &checks {
                    cw.serialize(c)?;
                }
                cw.flush()?;
                Ok(())
            })?,
            json_artifact(
                "digital.json",
                &json!({ "mode": "expect", "estimates": rows, "checks": checks, "pass": pass }),
            )?,
        ];
        let mut summary = format!("digital {} ATM probabilities:", model.kind());
        for c in &checks {
            let _ = write!(
                summary,
                "\n  T = {:e}: {:.6} [{:.6}, {:.6}] target {:.6} {}",
                c.t,
                c.p_hat,
                c.ci_low,
                c.ci_high,
                c.target,
                verdict_word(c.pass)
            );
        }
        return outcome(pass, artifacts, summary);
    }

    let report = pricing::atm_digital_limit_check(model, &maturities, &cfg)?;
    let artifacts = vec![
        csv_artifact("digital.csv", |w| pricing::write_price_csv(&report.estimates, w))?,
        json_artifact("digital.json", &json!({ "mode": "atm-limit", "report": report, "pass": report.pass }))?,
    ];
    let e = &report.smallest_t_prob;
    let summary = format!(
        "digital {} ATM limit: P = {:.6} [{:.6}, {:.6}] at T = {:e}, limit 1/2 {}",
        model.kind(),
        e.p_hat,
        e.ci_low,
        e.ci_high,
        maturities.last().copied().unwrap_or(f64::NAN),
        verdict_word(report.pass)
    );
    outcome(report.pass, artifacts, summary)
}

// ---------------------------------------------------------------- skew

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkewParams {
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maturities: Option<Grid>,
    /// Black-Scholes prices from s0, r, sigma instead of simulating the model.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analytic: Option<bool>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s0: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Strike step for the central difference (default scales with sqrt(T)).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dk: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct RoundTrip {
    #[serde(rename = "K")]
    k: f64,
    #[serde(rename = "T")]
    t: f64,
    sigma: f64,
    sigma_implied: f64,
    abs_error: f64,
    pass: bool,
}

const ROUND_TRIP_TOLERANCE: f64 = 1e-8;

fn round_trip_grid(s0: f64, r: f64, sigma: f64) -> Result<Vec<RoundTrip>> {
    let mut rows = Vec::new();
    for t in [0.05, 0.1, 0.25, 0.5, 1.0] {
        for m in [0.8, 0.9, 1.0, 1.1, 1.2] {
            let k = s0 * m;
            let price = pricing::bs_call(s0, k, r, sigma, t)?;
            let q = pricing::implied_vol(price, s0, k, r, t)?;
            let abs_error = (q.sigma_imp - sigma).abs();
            rows.push(RoundTrip {
                k,
                t,
                sigma,
                sigma_implied: q.sigma_imp,
                abs_error,
                pass: abs_error <= ROUND_TRIP_TOLERANCE,
            });
        }
    }
    Ok(rows)
}

fn skew_cmd(config: &RunConfig) -> Result<super::RunOutcome> {
    let p: SkewParams = params(config)?;
    let maturities = match p.maturities {
        Some(g) => g.0,
        None => (2..=10).map(|k| 2f64.powi(-k)).collect(),
    };
    let analytic = p.analytic.unwrap_or(config.model.is_none());
    let cfg;
    let (pricer, round_trip) = if analytic {
        let s0 = p.s0.unwrap_or(100.0);
        let r = p.r.unwrap_or(0.05);
        let sigma = p.sigma.unwrap_or(0.2);
        (CallPricer::BlackScholes { s0, r, sigma }, Some(round_trip_grid(s0, r, sigma)?))
    } else {
        if p.s0.is_some() || p.r.is_some() || p.sigma.is_some() {
            return Err(Error::InvalidConfig("s0, r and sigma apply to analytic mode only".into()));
        }
        cfg = config.sim.to_config(200_000)?;
        (CallPricer::MonteCarlo { model: require_model(config)?, cfg: &cfg }, None)
    };
    let reports = maturities
        .iter()
        .enumerate()
        .map(|(i, &t)| match pricer {
            CallPricer::MonteCarlo { model, cfg } => {
                let run = cfg.clone().with_seed(derive_seed(cfg.seed, i as u64));
                skew::skew_report(&CallPricer::MonteCarlo { model, cfg: &run }, t, p.dk)
            }
            bs => skew::skew_report(&bs, t, p.dk),
        })
        .collect::<Result<Vec<_>>>()?;
    let width = if reports.len() >= 2 && reports.iter().all(|r| r.clt_width().is_some()) {
        Some(skew::width_ratio_check(&reports)?)
    } else {
        None
    };
    let bands_pass =
        reports.iter().all(|r| r.verdicts.model_free != BandVerdict::Fail && r.verdicts.clt != BandVerdict::Fail);
    let rt_pass = round_trip.as_ref().is_none_or(|v| v.iter().all(|r| r.pass));
    let pass = bands_pass && rt_pass && width.as_ref().is_none_or(|w| w.pass);

    let mut artifacts = vec![csv_artifact("skew.csv", |w| skew::write_skew_csv(&reports, w))?];
    if let Some(rows) = &round_trip {
        artifacts.push(csv_artifact("iv_roundtrip.csv", |w| {
            let mut cw = csv::Writer::from_writer(w);
            for r in rows {
                cw.serialize(r)?;
            }
            cw.flush()?;
            Ok(())
        })?);
    }
    artifacts.push(json_artifact(
        "skew.json",
        &json!({
            "analytic": analytic,
            "reports": reports,
            "width_ratio": width,
            "iv_roundtrip_pass": round_trip.as_ref().map(|_| rt_pass),
            "pass": pass,
        }),
    )?);
    let mut summary = format!("skew over {} maturities: bands {}", reports.len(), verdict_word(bands_pass));
    if let Some(w) = &width {
        let _ = write!(summary, ", width ratio {} (max deviation {:.4})", verdict_word(w.pass), w.max_deviation);
    }
    if round_trip.is_some() {
        let _ = write!(summary, ", implied-vol round trip {}", verdict_word(rt_pass));
    }
    outcome(pass, artifacts, summary)
}

// ---------------------------------------------------------------- ldp

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdpParams {
    /// const:s, linear:a,b (a + b u) or power:a,p (a u^p).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<String>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Value the rate must match, in addition to its closed form.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum SigmaFn {
    Const { s: f64 },
    Linear { a: f64, b: f64 },
    Power { a: f64, p: f64 },
}

impl SigmaFn {
    fn parse(spec: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("bad sigma `{spec}`; use const:s, linear:a,b or power:a,p"));
        let (kind, args) = spec.split_once(':').ok_or_else(bad)?;
        let nums: Vec<f64> =
            args.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?;
        match (kind.trim(), nums.as_slice()) {
            ("const", [s]) => Ok(SigmaFn::Const { s: *s }),
            ("linear", [a, b]) => Ok(SigmaFn::Linear { a: *a, b: *b }),
            ("power", [a, p]) => Ok(SigmaFn::Power { a: *a, p: *p }),
            _ => Err(bad()),
        }
    }

    fn eval(self, u: f64) -> f64 {
        match self {
            SigmaFn::Const { s } => s,
            SigmaFn::Linear { a, b } => a + b * u,
            SigmaFn::Power { a, p } => a * u.powf(p),
        }
    }

    /// Antiderivative-based `(int du / sigma)^2 / 2`.
    fn closed_form(self, x0: f64, eps: f64) -> f64 {
        let x1 = x0 + eps;
        let integral = match self {
            SigmaFn::Const { s } => eps / s,
            SigmaFn::Linear { b: 0.0, .. } => eps / self.eval(x0),
            SigmaFn::Linear { b, .. } => (self.eval(x1) / self.eval(x0)).ln() / b,
            SigmaFn::Power { a, p: 1.0 } => (x1 / x0).ln() / a,
            SigmaFn::Power { a, p } => (x1.powf(1.0 - p) - x0.powf(1.0 - p)) / (a * (1.0 - p)),
        };
        0.5 * integral * integral
    }

    fn tolerance(self) -> f64 {
        match self {
            SigmaFn::Const { .. } => 1e-10,
            _ => 1e-8,
        }
    }
}

fn ldp(config: &RunConfig) -> Result<super::RunOutcome> {
    let p: LdpParams = params(config)?;
    let spec = p.sigma.as_deref().ok_or_else(|| Error::InvalidConfig("ldp needs `sigma`".into()))?;
    let sigma = SigmaFn::parse(spec)?;
    let x0 = p.x0.unwrap_or(1.0);
    let eps = p.eps.unwrap_or(1.0);
    let rate = clt::ldp_rate(|u| sigma.eval(u), x0, eps)?;
    let closed = sigma.closed_form(x0, eps);
    let tol = sigma.tolerance();
    let closed_ok = (rate - closed).abs() <= tol;
    let expect_ok = p.expect.is_none_or(|e| (rate - e).abs() <= tol);
    let pass = closed_ok && expect_ok;
    let artifacts = vec![json_artifact(
        "ldp.json",
        &json!({
            "sigma": sigma,
            "x0": x0,
            "eps": eps,
            "rate": rate,
            "closed_form": closed,
            "abs_error": (rate - closed).abs(),
            "expect": p.expect,
            "tolerance": tol,
            "pass": pass,
        }),
    )?];
    let summary = format!("ldp I({}) = {rate:.12} (closed form {closed:.12}) {}", x0 + eps, verdict_word(pass));
    outcome(pass, artifacts, summary)
}

// ---------------------------------------------------------------- examples

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExamplesParams {
    /// bessel, poisson, quantile-drift or squared-bm.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Dimension for the squared Bessel example.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Quantile for the quantile-drift example.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

#[derive(Debug, Serialize)]
struct ExampleRow {
    parameter: f64,
    probability: f64,
}

fn examples(config: &RunConfig) -> Result<super::RunOutcome> {
    let p: ExamplesParams = params(config)?;
    let name = p.name.as_deref().unwrap_or("bessel");
    let mut text = String::new();
    let (header, rows): (&str, Vec<ExampleRow>) = match name {
        "bessel" => {
            let delta = p.delta.unwrap_or(2.0);
            let tail = 1.0 - gamma_cdf(delta, 0.5 * delta, 2.0)?;
            let _ = writeln!(text, "squared Bessel process of dimension {delta} started at 0:");
            let _ = writeln!(
                text,
                "P(R_1^2 > {delta}) = 1 - gamma_cdf({delta}; shape {}, scale 2) = {tail:.6}",
                0.5 * delta
            );
            let _ = writeln!(text, "P(R_t > delta t) does not depend on t; as delta grows it tends to 1/2:");
            let rows = [0.5, 1.0, 2.0, 5.0, 10.0, 50.0, 100.0, 1e3, 1e4, 1e5]
                .iter()
                .map(|&d| Ok(ExampleRow { parameter: d, probability: 1.0 - gamma_cdf(d, 0.5 * d, 2.0)? }))
                .collect::<Result<Vec<_>>>()?;
            ("delta", rows)
        }
        "poisson" => {
            let _ = writeln!(text, "compensated Poisson X_t = t - P_t: P(X_t > 0) = exp(-t) tends to 1, not 1/2:");
            let rows = [1.0, 0.5, 1e-1, 1e-2, 1e-3, 1e-4]
                .iter()
                .map(|&t| ExampleRow { parameter: t, probability: (-t).exp() })
                .collect();
            ("t", rows)
        }
        "quantile-drift" => {
            let q = p.p.unwrap_or(0.25);
            let shift = normal_quantile(q)?;
            let _ = writeln!(
                text,
                "Brownian motion with drift {shift:.6} sqrt(t): P(X_t > 0) = {q} at every t, so the limit is not 1/2:"
            );
            let rows = [1.0, 1e-2, 1e-4, 1e-6].iter().map(|&t| ExampleRow { parameter: t, probability: q }).collect();
            ("t", rows)
        }
        "squared-bm" => {
            let q99 = normal_quantile(0.995)?.powi(2);
            let _ = writeln!(text, "X = B^2: (X_t - X_0)/sqrt(t) = sqrt(t) Z^2 collapses to 0; 99% quantile of |.|:");
            let rows = [1.0, 1e-2, 1e-4, 1e-6]
                .iter()
                .map(|&t: &f64| ExampleRow { parameter: t, probability: t.sqrt() * q99 })
                .collect();
            ("t", rows)
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown example `{other}`; use bessel, poisson, quantile-drift or squared-bm"
            )))
        }
    };
    let value_col = if name == "squared-bm" { "abs_q99" } else { "probability" };
    let _ = writeln!(text, "{header:>10}  {value_col}");
    for r in &rows {
        let _ = writeln!(text, "{:>10}  {:.6}", r.parameter, r.probability);
    }
    let artifacts = vec![csv_artifact("examples.csv", |w| {
        let mut cw = csv::Writer::from_writer(w);
        cw.write_record([header, value_col])?;
        for r in &rows {
            cw.write_record([r.parameter.to_string(), r.probability.to_string()])?;
        }
        cw.flush()?;
        Ok(())
    })?];
    outcome(true, artifacts, text.trim_end().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mapping_names_parse() {
        assert_eq!(parse_mapping("log-price").unwrap(), Mapping::log_price());
        assert_eq!(parse_mapping("coordinate:2").unwrap(), Mapping::Coordinate(2));
        assert_eq!(parse_mapping(r#"{"coordinate":1}"#).unwrap(), Mapping::Coordinate(1));
        assert!(parse_mapping("cube").is_err());
    }

    #[test]
    fn ldp_closed_forms() {
        let lin = SigmaFn::parse("linear:0,1").unwrap();
        assert!((lin.closed_form(1.0, 1.0) - 0.240_226_506_959_100_7).abs() < 1e-15);
        let pw = SigmaFn::parse("power:1,1").unwrap();
        assert!((pw.closed_form(1.0, 1.0) - 0.240_226_506_959_100_7).abs() < 1e-15);
        let c = SigmaFn::parse("const:0.5").unwrap();
        assert!((c.closed_form(0.0, 0.3) - 0.18).abs() < 1e-15);
        assert!(SigmaFn::parse("const:1,2").is_err());
        assert!(SigmaFn::parse("cubic:1").is_err());
    }

    #[test]
    fn bessel_example_output() {
        let cfg = RunConfig::from_json(r#"{"command":"examples","params":{"name":"bessel","delta":2}}"#).unwrap();
        let out = dispatch(&cfg).unwrap();
        assert!(out.summary.contains("= 0.367879"), "{}", out.summary);
        assert!(out.pass);
    }

    #[test]
    fn exact_probabilities() {
        let qd = ModelSpec::quantile_drift_bm(0.25).unwrap();
        assert_eq!(exact_atm_probability(&qd, 1e-4), Some(0.25));
        let pm = ModelSpec::poisson_martingale(1.0).unwrap();
        assert_eq!(exact_atm_probability(&pm, 0.5), Some((-0.5f64).exp()));
        let bes = ModelSpec::squared_bessel(2.0, 0.0).unwrap();
        assert!((exact_atm_probability(&bes, 1.0).unwrap() - (-1.0f64).exp()).abs() < 1e-14);
        assert!(exact_atm_probability(&ModelSpec::squared_bm().unwrap(), 1.0).is_none());
    }
}
