//! Explicit envelopes for `P(X_t > X_0)` under a bounded drift.
//!
//! If the first coordinate has drift `b` and a deterministic, invertible
//! diffusion `sigma(t)` with `|sigma^{-1} b| <= c`, a change of measure to the
//! driftless law plus Hölder's inequality gives
//!
//! ```text
//! e^{f1(t)} <= P(X_t > X_0) <= e^{f2(t)}
//! ```
//!
//! With `a = c^2 t` and `alpha = sqrt(2 ln 2)` the optimized exponents are
//! `f1 = -(alpha + sqrt(a))^2 / 2` and `f2 = -(alpha - sqrt(a))^2 / 2`. The
//! upper bound needs its Hölder exponent `sqrt(2 ln 2 / a)` to exceed 1, which
//! fails from `t* = 2 ln 2 / c^2` on; there the trivial bound 1 is returned and
//! the point is flagged out of horizon. The same envelopes hold with jumps
//! whose law is symmetric.

use std::f64::consts::LN_2;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Dynamics, ModelSpec};
use crate::simulate::{derive_seed, simulate_terminal, SimConfig};
use crate::stats::{normal_cdf, prob_exceed, ProbEstimate};

/// Slack allowed when comparing an exact probability with the envelope.
pub const BOUND_TOLERANCE: f64 = 1e-12;
/// Confidence of the Wilson interval in Monte Carlo bracketing checks.
pub const BRACKETING_CONFIDENCE: f64 = 0.99;

fn alpha() -> f64 {
    (2.0 * LN_2).sqrt()
}

/// Uniform bound `c = sup |sigma^{-1} b|` on the measure-change kernel, in
/// units of `1 / sqrt(time)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftDiffusionBound {
    c: f64,
}

impl DriftDiffusionBound {
    pub fn new(c: f64) -> Result<Self> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::Domain(format!("drift bound must be finite and >= 0, got {c}")));
        }
        Ok(DriftDiffusionBound { c })
    }

    pub fn c(self) -> f64 {
        self.c
    }

    /// `t* = 2 ln 2 / c^2`, infinite when `c = 0`.
    pub fn horizon(self) -> f64 {
        if self.c == 0.0 {
            f64::INFINITY
        } else {
            2.0 * LN_2 / (self.c * self.c)
        }
    }

    /// Exponents `(f1, f2)` at `t`; `f2 = 0` from the horizon on.
    pub fn exponents(self, t: f64) -> (f64, f64) {
        if self.c == 0.0 {
            return (-LN_2, -LN_2);
        }
        let s = self.c * t.sqrt();
        let f1 = -0.5 * (alpha() + s).powi(2);
        let f2 = if t < self.horizon() { -0.5 * (alpha() - s).powi(2) } else { 0.0 };
        (f1, f2)
    }

    /// The envelope `(e^{f1}, e^{f2})` at `t`.
    pub fn envelope(self, t: f64) -> (f64, f64) {
        if self.c == 0.0 {
            return (0.5, 0.5);
        }
        let (f1, f2) = self.exponents(t);
        (f1.exp(), f2.exp())
    }

    /// First-order expansions `1/2 -+ sqrt(ln 2 / 2) c sqrt(t)`.
    pub fn expansion(self, t: f64) -> (f64, f64) {
        let d = (0.5 * LN_2).sqrt() * self.c * t.sqrt();
        (0.5 - d, 0.5 + d)
    }

    /// Optimal Hölder exponents `(p_lower, p_upper)` at `t`.
    pub fn holder_exponents(self, t: f64) -> (f64, f64) {
        let a = self.c * self.c * t;
        (1.0 + (a / (2.0 * LN_2)).sqrt(), (2.0 * LN_2 / a).sqrt())
    }

    /// `lim_{t -> 0} |e^{f_i}(t) - expansion_i(t)| / t = (ln 2 - 1/2) c^2 / 2`,
    /// the same for both sides.
    pub fn remainder_limit(self) -> f64 {
        0.5 * (LN_2 - 0.5) * self.c * self.c
    }
}

/// Envelope, expansions and Hölder exponents tabulated on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsCurve {
    pub c: f64,
    pub t_grid: Vec<f64>,
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
    pub e_f1: Vec<f64>,
    pub e_f2: Vec<f64>,
    pub expansion_lo: Vec<f64>,
    pub expansion_hi: Vec<f64>,
    /// `t*`; serialized as `null` when infinite.
    #[serde(with = "infinite_as_null")]
    pub horizon: f64,
    pub p_lower: Vec<f64>,
    pub p_upper: Vec<f64>,
    pub in_horizon: Vec<bool>,
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

fn check_times(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::InvalidConfig("empty time grid".into()));
    }
    if let Some(t) = t_grid.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(Error::Domain(format!("times must be positive and finite, got {t}")));
    }
    Ok(())
}

pub fn girsanov_bounds(bound: DriftDiffusionBound, t_grid: &[f64]) -> Result<BoundsCurve> {
    check_times(t_grid)?;
    let n = t_grid.len();
    let mut curve = BoundsCurve {
        c: bound.c(),
        t_grid: t_grid.to_vec(),
        f1: Vec::with_capacity(n),
        f2: Vec::with_capacity(n),
        e_f1: Vec::with_capacity(n),
        e_f2: Vec::with_capacity(n),
        expansion_lo: Vec::with_capacity(n),
        expansion_hi: Vec::with_capacity(n),
        horizon: bound.horizon(),
        p_lower: Vec::with_capacity(n),
        p_upper: Vec::with_capacity(n),
        in_horizon: Vec::with_capacity(n),
    };
    for &t in t_grid {
        let (f1, f2) = bound.exponents(t);
        let (e1, e2) = bound.envelope(t);
        let (lo, hi) = bound.expansion(t);
        let (pl, pu) = bound.holder_exponents(t);
        curve.f1.push(f1);
        curve.f2.push(f2);
        curve.e_f1.push(e1);
        curve.e_f2.push(e2);
        curve.expansion_lo.push(lo);
        curve.expansion_hi.push(hi);
        curve.p_lower.push(pl);
        curve.p_upper.push(pu);
        curve.in_horizon.push(t < curve.horizon);
    }
    Ok(curve)
}

impl BoundsCurve {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "t",
            "f1",
            "f2",
            "e_f1",
            "e_f2",
            "expansion_lo",
            "expansion_hi",
            "p_lower",
            "p_upper",
            "in_horizon",
        ])?;
        for i in 0..self.t_grid.len() {
            let nums = [
                self.t_grid[i],
                self.f1[i],
                self.f2[i],
                self.e_f1[i],
                self.e_f2[i],
                self.expansion_lo[i],
                self.expansion_hi[i],
                self.p_lower[i],
                self.p_upper[i],
            ];
            let mut rec: Vec<String> = nums.iter().map(|v| v.to_string()).collect();
            rec.push(self.in_horizon[i].to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Remainder ratios `|e^{f_i}(t) - expansion_i(t)| / t` as `(lower, upper)`
/// pairs.
pub fn expansion_error(bound: DriftDiffusionBound, t_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    check_times(t_grid)?;
    let limit = bound.horizon().min(1.0);
    if let Some(t) = t_grid.iter().find(|t| **t >= limit) {
        return Err(Error::Domain(format!("expansion check needs t < min(t*, 1) = {limit}, got {t}")));
    }
    Ok(t_grid
        .iter()
        .map(|&t| {
            let (e1, e2) = bound.envelope(t);
            let (lo, hi) = bound.expansion(t);
            ((e1 - lo).abs() / t, (e2 - hi).abs() / t)
        })
        .collect())
}

/// `c` for catalog models covered by the envelope: constant drift and
/// constant invertible diffusion of the first coordinate (GBM via its log).
pub fn drift_bound_for_model(model: &ModelSpec) -> Result<DriftDiffusionBound> {
    let c = match *model.dynamics() {
        Dynamics::DriftedBm { b, sigma } if sigma > 0.0 => b.abs() * (model.dim() as f64).sqrt() / sigma,
        Dynamics::Gbm { r, sigma } if sigma > 0.0 => (r - 0.5 * sigma * sigma).abs() / sigma,
        Dynamics::JumpDiffusion { b, sigma, .. } if sigma > 0.0 => b.abs() / sigma,
        _ => {
            return Err(Error::OutOfScope(format!(
                "{} has no drift bound with deterministic invertible diffusion",
                model.kind()
            )))
        }
    };
    DriftDiffusionBound::new(c)
}

/// `P(X^1_t > X^1_0)` in closed form where the marginal is Gaussian in the
/// working coordinate.
pub fn exact_exceedance(model: &ModelSpec, t: f64) -> Option<f64> {
    match *model.dynamics() {
        Dynamics::DriftedBm { b, sigma } if sigma > 0.0 => Some(normal_cdf(b * t.sqrt() / sigma)),
        Dynamics::Gbm { r, sigma } if sigma > 0.0 => Some(normal_cdf((r - 0.5 * sigma * sigma) * t.sqrt() / sigma)),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketingPoint {
    pub t: f64,
    pub e_f1: f64,
    pub e_f2: f64,
    pub in_horizon: bool,
    /// Closed-form probability, when available.
    pub exact: Option<f64>,
    /// Monte Carlo estimate otherwise.
    pub estimate: Option<ProbEstimate>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketingReport {
    pub c: f64,
    pub points: Vec<BracketingPoint>,
}

impl BracketingReport {
    pub fn pass(&self) -> bool {
        self.points.iter().all(|p| p.pass)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "e_f1", "e_f2", "p", "ci_low", "ci_high", "in_horizon", "pass"])?;
        for p in &self.points {
            let (v, lo, hi) = match (&p.exact, &p.estimate) {
                (Some(v), _) => (*v, *v, *v),
                (None, Some(e)) => (e.p_hat, e.ci_low, e.ci_high),
                (None, None) => (f64::NAN, f64::NAN, f64::NAN),
            };
            w.write_record([
                p.t.to_string(),
                p.e_f1.to_string(),
                p.e_f2.to_string(),
                v.to_string(),
                lo.to_string(),
                hi.to_string(),
                p.in_horizon.to_string(),
                p.pass.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Checks the envelope against `P(X^1_t > X^1_0)` at every `t`: exactly
/// where the marginal is known, otherwise through a 99% Wilson interval that
/// must overlap the envelope. Time `t_grid[i]` is simulated with seed
/// `derive_seed(cfg.seed, i)`.
pub fn verify_bracketing(model: &ModelSpec, t_grid: &[f64], cfg: &SimConfig) -> Result<BracketingReport> {
    let bound = drift_bound_for_model(model)?;
    check_times(t_grid)?;
    let points = t_grid
        .par_iter()
        .enumerate()
        .map(|(i, &t)| {
            let (e1, e2) = bound.envelope(t);
            let mut point = BracketingPoint {
                t,
                e_f1: e1,
                e_f2: e2,
                in_horizon: t < bound.horizon(),
                exact: exact_exceedance(model, t),
                estimate: None,
                pass: false,
            };
            if let Some(p) = point.exact {
                point.pass = e1 - BOUND_TOLERANCE <= p && p <= e2 + BOUND_TOLERANCE;
            } else {
                let run = cfg.clone().with_seed(derive_seed(cfg.seed, i as u64));
                let sample = simulate_terminal(model, t, &run)?;
                let est = prob_exceed(&sample, 0, model.x0()[0], BRACKETING_CONFIDENCE)?;
                point.pass = est.overlaps(e1, e2);
                point.estimate = Some(est);
            }
            Ok(point)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BracketingReport { c: bound.c(), points })
}
