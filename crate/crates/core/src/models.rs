//! Catalog of semimartingale models with analytic coefficient knowledge.
//!
//! A [`ModelSpec`] is a validated, immutable description of one model of the
//! catalog: kind, named parameters, initial state and dimension. Its
//! coefficients are exposed through [`CoefficientView`], the small-time
//! diffusion limit through [`small_time_matrix`], and the admissibility of the
//! model for the small-time limit theorems through [`check_assumptions`].
//!
//! Parameter names per kind:
//!
//! | kind                | params                                          | dim | x0            |
//! |---------------------|-------------------------------------------------|-----|---------------|
//! | `DriftedBM`         | `b`, `sigma`                                    | m   | any           |
//! | `GBM`               | `r`, `sigma`                                    | 1   | S0 > 0        |
//! | `CEV`               | `r`, `sigma`, `beta`                            | 1   | S0 >= 0       |
//! | `Heston`            | `r`, `kappa`, `theta`, `xi`, `rho`              | 2   | (S0, v0)      |
//! | `SquaredBessel`     | `delta`                                         | 1   | >= 0          |
//! | `SquaredBM`         | none                                            | 1   | >= 0          |
//! | `QuantileDriftBM`   | `p`                                             | 1   | any           |
//! | `PoissonMartingale` | `rate`                                          | 1   | any           |
//! | `JumpDiffusion`     | `b`, `sigma`, `intensity`, one of `jump_two_point` / `jump_uniform` | 1 | any |
//!
//! `GBM` and `Heston` may also be stated in log coordinates (`"coords": "log"`),
//! in which case the first state coordinate is `log S`.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use rand::Rng;
use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::normal_quantile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    DriftedBM,
    GBM,
    CEV,
    Heston,
    SquaredBessel,
    SquaredBM,
    QuantileDriftBM,
    PoissonMartingale,
    JumpDiffusion,
}

impl ModelKind {
    pub const ALL: [ModelKind; 9] = [
        ModelKind::DriftedBM,
        ModelKind::GBM,
        ModelKind::CEV,
        ModelKind::Heston,
        ModelKind::SquaredBessel,
        ModelKind::SquaredBM,
        ModelKind::QuantileDriftBM,
        ModelKind::PoissonMartingale,
        ModelKind::JumpDiffusion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::DriftedBM => "DriftedBM",
            ModelKind::GBM => "GBM",
            ModelKind::CEV => "CEV",
            ModelKind::Heston => "Heston",
            ModelKind::SquaredBessel => "SquaredBessel",
            ModelKind::SquaredBM => "SquaredBM",
            ModelKind::QuantileDriftBM => "QuantileDriftBM",
            ModelKind::PoissonMartingale => "PoissonMartingale",
            ModelKind::JumpDiffusion => "JumpDiffusion",
        }
    }

    fn required_params(self) -> &'static [&'static str] {
        match self {
            ModelKind::DriftedBM => &["b", "sigma"],
            ModelKind::GBM => &["r", "sigma"],
            ModelKind::CEV => &["r", "sigma", "beta"],
            ModelKind::Heston => &["r", "kappa", "theta", "xi", "rho"],
            ModelKind::SquaredBessel => &["delta"],
            ModelKind::SquaredBM => &[],
            ModelKind::QuantileDriftBM => &["p"],
            ModelKind::PoissonMartingale => &["rate"],
            ModelKind::JumpDiffusion => &["b", "sigma", "intensity"],
        }
    }

    fn optional_params(self) -> &'static [&'static str] {
        match self {
            ModelKind::JumpDiffusion => &["jump_two_point", "jump_uniform"],
            _ => &[],
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Coordinates in which the first state component is expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coordinates {
    #[default]
    Price,
    Log,
}

impl Coordinates {
    fn is_price(&self) -> bool {
        *self == Coordinates::Price
    }
}

/// Symmetric jump-size law. Only symmetric laws are representable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum JumpLaw {
    /// `+a` or `-a` with probability 1/2 each.
    TwoPoint { a: f64 },
    /// Uniform on `[-a, a]`.
    Uniform { a: f64 },
}

impl JumpLaw {
    pub fn half_width(&self) -> f64 {
        match *self {
            JumpLaw::TwoPoint { a } | JumpLaw::Uniform { a } => a,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            JumpLaw::TwoPoint { a } => a * a,
            JumpLaw::Uniform { a } => a * a / 3.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            JumpLaw::TwoPoint { a } => {
                if rng.random::<bool>() {
                    a
                } else {
                    -a
                }
            }
            JumpLaw::Uniform { a } => a * (2.0 * rng.random::<f64>() - 1.0),
        }
    }
}

/// Finite-activity compound Poisson jump component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpSpec {
    /// Jumps per unit time.
    pub intensity: f64,
    pub law: JumpLaw,
}

/// Typed coefficients of a validated model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dynamics {
    DriftedBm {
        b: f64,
        sigma: f64,
    },
    Gbm {
        r: f64,
        sigma: f64,
    },
    Cev {
        r: f64,
        sigma: f64,
        beta: f64,
    },
    Heston {
        r: f64,
        kappa: f64,
        theta: f64,
        xi: f64,
        rho: f64,
    },
    SquaredBessel {
        delta: f64,
    },
    SquaredBm,
    /// `shift` is the standard normal quantile of `p`.
    QuantileDriftBm {
        p: f64,
        shift: f64,
    },
    PoissonMartingale {
        rate: f64,
    },
    JumpDiffusion {
        b: f64,
        sigma: f64,
        jumps: JumpSpec,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModelSpec {
    kind: ModelKind,
    #[serde(default)]
    params: BTreeMap<String, f64>,
    x0: Vec<f64>,
    dim: usize,
    #[serde(default, skip_serializing_if = "Coordinates::is_price")]
    coords: Coordinates,
}

/// A validated catalog model. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModelSpec", into = "RawModelSpec")]
pub struct ModelSpec {
    kind: ModelKind,
    params: BTreeMap<String, f64>,
    x0: Vec<f64>,
    dim: usize,
    coords: Coordinates,
    dynamics: Dynamics,
}

impl TryFrom<RawModelSpec> for ModelSpec {
    type Error = Error;

    fn try_from(raw: RawModelSpec) -> Result<Self> {
        ModelSpec::with_coords(raw.kind, raw.params, raw.x0, raw.dim, raw.coords)
    }
}

impl From<ModelSpec> for RawModelSpec {
    fn from(m: ModelSpec) -> Self {
        RawModelSpec { kind: m.kind, params: m.params, x0: m.x0, dim: m.dim, coords: m.coords }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidModel(msg.into())
}

fn params_of(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

impl ModelSpec {
    pub fn new(kind: ModelKind, params: BTreeMap<String, f64>, x0: Vec<f64>, dim: usize) -> Result<Self> {
        Self::with_coords(kind, params, x0, dim, Coordinates::Price)
    }

    pub fn with_coords(
        kind: ModelKind,
        params: BTreeMap<String, f64>,
        x0: Vec<f64>,
        dim: usize,
        coords: Coordinates,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dim must be at least 1"));
        }
        if x0.len() != dim {
            return Err(invalid(format!("x0 has length {} but dim is {dim}", x0.len())));
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(invalid("x0 must be finite"));
        }
        let required = kind.required_params();
        let optional = kind.optional_params();
        for (name, value) in &params {
            if !required.contains(&name.as_str()) && !optional.contains(&name.as_str()) {
                return Err(invalid(format!("unknown parameter `{name}` for {kind}")));
            }
            if !value.is_finite() {
                return Err(invalid(format!("parameter `{name}` must be finite")));
            }
        }
        for name in required {
            if !params.contains_key(*name) {
                return Err(invalid(format!("missing parameter `{name}` for {kind}")));
            }
        }
        let expected_dim = match kind {
            ModelKind::DriftedBM => dim,
            ModelKind::Heston => 2,
            _ => 1,
        };
        if dim != expected_dim {
            return Err(invalid(format!("{kind} has dimension {expected_dim}, got {dim}")));
        }
        if coords == Coordinates::Log && !matches!(kind, ModelKind::GBM | ModelKind::Heston) {
            return Err(invalid(format!("{kind} has no log-coordinate form")));
        }

        let p = |name: &str| params[name];
        let nonneg = |name: &str| -> Result<f64> {
            let v = p(name);
            if v < 0.0 {
                Err(invalid(format!("`{name}` must be non-negative, got {v}")))
            } else {
                Ok(v)
            }
        };
        let positive_price = |v: f64| -> Result<()> {
            if coords == Coordinates::Price && v <= 0.0 {
                Err(invalid(format!("{kind} needs a positive initial price, got {v}")))
            } else {
                Ok(())
            }
        };

        let dynamics = match kind {
            ModelKind::DriftedBM => Dynamics::DriftedBm { b: p("b"), sigma: nonneg("sigma")? },
            ModelKind::GBM => {
                positive_price(x0[0])?;
                Dynamics::Gbm { r: p("r"), sigma: nonneg("sigma")? }
            }
            ModelKind::CEV => {
                let beta = p("beta");
                if !(beta > 0.0 && beta <= 1.0) {
                    return Err(invalid(format!("CEV exponent must lie in (0, 1], got {beta}")));
                }
                if x0[0] < 0.0 {
                    return Err(invalid("CEV needs a non-negative initial price"));
                }
                Dynamics::Cev { r: p("r"), sigma: nonneg("sigma")?, beta }
            }
            ModelKind::Heston => {
                positive_price(x0[0])?;
                if x0[1] < 0.0 {
                    return Err(invalid("Heston initial variance must be non-negative"));
                }
                let rho = p("rho");
                if !(-1.0..=1.0).contains(&rho) {
                    return Err(invalid(format!("Heston correlation must lie in [-1, 1], got {rho}")));
                }
                Dynamics::Heston { r: p("r"), kappa: nonneg("kappa")?, theta: nonneg("theta")?, xi: nonneg("xi")?, rho }
            }
            ModelKind::SquaredBessel => {
                if x0[0] < 0.0 {
                    return Err(invalid("squared Bessel process starts at a non-negative point"));
                }
                Dynamics::SquaredBessel { delta: nonneg("delta")? }
            }
            ModelKind::SquaredBM => {
                if x0[0] < 0.0 {
                    return Err(invalid("squared Brownian motion starts at a non-negative point"));
                }
                Dynamics::SquaredBm
            }
            ModelKind::QuantileDriftBM => {
                let prob = p("p");
                if !(prob > 0.0 && prob < 1.0) {
                    return Err(invalid(format!("p must lie in (0, 1), got {prob}")));
                }
                Dynamics::QuantileDriftBm { p: prob, shift: normal_quantile(prob)? }
            }
            ModelKind::PoissonMartingale => Dynamics::PoissonMartingale { rate: nonneg("rate")? },
            ModelKind::JumpDiffusion => {
                let law = match (params.get("jump_two_point"), params.get("jump_uniform")) {
                    (Some(&a), None) => JumpLaw::TwoPoint { a },
                    (None, Some(&a)) => JumpLaw::Uniform { a },
                    _ => return Err(invalid("JumpDiffusion needs exactly one of `jump_two_point`, `jump_uniform`")),
                };
                if law.half_width() < 0.0 {
                    return Err(invalid("jump size must be non-negative"));
                }
                Dynamics::JumpDiffusion {
                    b: p("b"),
                    sigma: nonneg("sigma")?,
                    jumps: JumpSpec { intensity: nonneg("intensity")?, law },
                }
            }
        };

        Ok(ModelSpec { kind, params, x0, dim, coords, dynamics })
    }

    pub fn drifted_bm(b: f64, sigma: f64) -> Result<Self> {
        Self::new(ModelKind::DriftedBM, params_of(&[("b", b), ("sigma", sigma)]), vec![0.0], 1)
    }

    /// `dim`-dimensional Brownian motion with drift `b` in every coordinate and
    /// diffusion `sigma * I`.
    pub fn drifted_bm_nd(b: f64, sigma: f64, dim: usize) -> Result<Self> {
        Self::new(ModelKind::DriftedBM, params_of(&[("b", b), ("sigma", sigma)]), vec![0.0; dim], dim)
    }

    pub fn gbm(s0: f64, r: f64, sigma: f64) -> Result<Self> {
        Self::new(ModelKind::GBM, params_of(&[("r", r), ("sigma", sigma)]), vec![s0], 1)
    }

    pub fn cev(s0: f64, r: f64, sigma: f64, beta: f64) -> Result<Self> {
        Self::new(ModelKind::CEV, params_of(&[("r", r), ("sigma", sigma), ("beta", beta)]), vec![s0], 1)
    }

    pub fn heston(s0: f64, v0: f64, p: HestonParams) -> Result<Self> {
        Self::new(
            ModelKind::Heston,
            params_of(&[("r", p.r), ("kappa", p.kappa), ("theta", p.theta), ("xi", p.xi), ("rho", p.rho)]),
            vec![s0, v0],
            2,
        )
    }

    pub fn squared_bessel(delta: f64, x0: f64) -> Result<Self> {
        Self::new(ModelKind::SquaredBessel, params_of(&[("delta", delta)]), vec![x0], 1)
    }

    pub fn squared_bm() -> Result<Self> {
        Self::new(ModelKind::SquaredBM, BTreeMap::new(), vec![0.0], 1)
    }

    pub fn quantile_drift_bm(p: f64) -> Result<Self> {
        Self::new(ModelKind::QuantileDriftBM, params_of(&[("p", p)]), vec![0.0], 1)
    }

    pub fn poisson_martingale(rate: f64) -> Result<Self> {
        Self::new(ModelKind::PoissonMartingale, params_of(&[("rate", rate)]), vec![0.0], 1)
    }

    pub fn jump_diffusion(b: f64, sigma: f64, intensity: f64, law: JumpLaw) -> Result<Self> {
        let jump = match law {
            JumpLaw::TwoPoint { a } => ("jump_two_point", a),
            JumpLaw::Uniform { a } => ("jump_uniform", a),
        };
        Self::new(
            ModelKind::JumpDiffusion,
            params_of(&[("b", b), ("sigma", sigma), ("intensity", intensity), jump]),
            vec![0.0],
            1,
        )
    }

    /// Same model with a different initial state.
    pub fn with_x0(&self, x0: Vec<f64>) -> Result<Self> {
        Self::with_coords(self.kind, self.params.clone(), x0, self.dim, self.coords)
    }

    /// Re-expresses a price-coordinate GBM or Heston model in log coordinates.
    pub fn in_log_coords(&self) -> Result<Self> {
        if self.coords == Coordinates::Log {
            return Ok(self.clone());
        }
        let mut x0 = self.x0.clone();
        x0[0] = x0[0].ln();
        Self::with_coords(self.kind, self.params.clone(), x0, self.dim, Coordinates::Log)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> Coordinates {
        self.coords
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    /// Number of driving Brownian motions.
    pub fn noise_dim(&self) -> usize {
        match self.dynamics {
            Dynamics::DriftedBm { .. } => self.dim,
            Dynamics::Heston { .. } => 2,
            Dynamics::PoissonMartingale { .. } => 0,
            _ => 1,
        }
    }

    /// Deterministic short rate carried by the model, zero when it has none.
    pub fn rate(&self) -> f64 {
        match self.dynamics {
            Dynamics::Gbm { r, .. } | Dynamics::Cev { r, .. } | Dynamics::Heston { r, .. } => r,
            _ => 0.0,
        }
    }

    /// Initial price of a price-type model, whatever its coordinates.
    pub fn spot(&self) -> f64 {
        match self.coords {
            Coordinates::Price => self.x0[0],
            Coordinates::Log => self.x0[0].exp(),
        }
    }

    /// Maps a price level onto the first state coordinate.
    pub fn price_to_state(&self, price: f64) -> f64 {
        match self.coords {
            Coordinates::Price => price,
            Coordinates::Log => price.ln(),
        }
    }

    /// At-the-money level of the first coordinate at time `t`: the initial
    /// value, shifted by the compensator `delta * t` for the squared Bessel
    /// process so that the comparison is made for the martingale `R - delta t`.
    pub fn atm_level(&self, t: f64) -> f64 {
        match self.dynamics {
            Dynamics::SquaredBessel { delta } => self.x0[0] + delta * t,
            _ => self.x0[0],
        }
    }

    pub fn coefficients(&self) -> CoefficientView<'_> {
        CoefficientView { model: self }
    }

    /// Heston Feller condition `2 kappa theta >= xi^2`; `None` for other kinds.
    pub fn feller_condition(&self) -> Option<bool> {
        match self.dynamics {
            Dynamics::Heston { kappa, theta, xi, .. } => Some(2.0 * kappa * theta >= xi * xi),
            _ => None,
        }
    }
}

/// Heston parameters other than the initial state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HestonParams {
    pub r: f64,
    pub kappa: f64,
    pub theta: f64,
    pub xi: f64,
    pub rho: f64,
}

/// Drift `b(t, x)`, diffusion `sigma(t, x)` (an `m x d` matrix) and jump part
/// of a model.
///
/// State-dependent square roots and powers use the positive part of the state
/// (full truncation for Heston variance, absorption for CEV/Bessel), so the
/// coefficients are total on the whole state space.
#[derive(Debug, Clone, Copy)]
pub struct CoefficientView<'a> {
    model: &'a ModelSpec,
}

impl CoefficientView<'_> {
    pub fn drift(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let log = self.model.coords == Coordinates::Log;
        match self.model.dynamics {
            Dynamics::DriftedBm { b, .. } => vec![b; self.model.dim],
            Dynamics::Gbm { r, sigma } => {
                if log {
                    vec![r - 0.5 * sigma * sigma]
                } else {
                    vec![r * x[0]]
                }
            }
            Dynamics::Cev { r, .. } => vec![r * x[0]],
            Dynamics::Heston { r, kappa, theta, .. } => {
                let v = x[1].max(0.0);
                let first = if log { r - 0.5 * v } else { r * x[0] };
                vec![first, kappa * (theta - v)]
            }
            Dynamics::SquaredBessel { delta } => vec![delta],
            Dynamics::SquaredBm => vec![1.0],
            Dynamics::QuantileDriftBm { shift, .. } => vec![shift / (2.0 * t.sqrt())],
            Dynamics::PoissonMartingale { rate } => vec![rate],
            Dynamics::JumpDiffusion { b, .. } => vec![b],
        }
    }

    pub fn diffusion(&self, _t: f64, x: &[f64]) -> DMatrix<f64> {
        let log = self.model.coords == Coordinates::Log;
        match self.model.dynamics {
            Dynamics::DriftedBm { sigma, .. } => DMatrix::from_diagonal_element(self.model.dim, self.model.dim, sigma),
            Dynamics::Gbm { sigma, .. } => DMatrix::from_element(1, 1, if log { sigma } else { sigma * x[0] }),
            Dynamics::Cev { sigma, beta, .. } => DMatrix::from_element(1, 1, sigma * x[0].max(0.0).powf(beta)),
            Dynamics::Heston { xi, rho, .. } => {
                let sv = x[1].max(0.0).sqrt();
                let s = if log { sv } else { sv * x[0] };
                DMatrix::from_row_slice(2, 2, &[s, 0.0, rho * xi * sv, (1.0 - rho * rho).sqrt() * xi * sv])
            }
            Dynamics::SquaredBessel { .. } | Dynamics::SquaredBm => {
                DMatrix::from_element(1, 1, 2.0 * x[0].max(0.0).sqrt())
            }
            Dynamics::QuantileDriftBm { .. } => DMatrix::from_element(1, 1, 1.0),
            Dynamics::PoissonMartingale { .. } => DMatrix::zeros(1, 0),
            Dynamics::JumpDiffusion { sigma, .. } => DMatrix::from_element(1, 1, sigma),
        }
    }

    /// Symmetric compound Poisson component, if any. The compensated Poisson
    /// martingale's `-1` jumps are not symmetric and are not reported here.
    pub fn jump(&self) -> Option<JumpSpec> {
        match self.model.dynamics {
            Dynamics::JumpDiffusion { jumps, .. } => Some(jumps),
            _ => None,
        }
    }

    /// One Euler–Maruyama step of the continuous part, in place. `dw` holds the
    /// Brownian increments over `[t, t + dt]`.
    ///
    /// The deterministic drift of `QuantileDriftBM` is integrated exactly over
    /// the step; it is not bounded at `t = 0`.
    pub(crate) fn euler_step(&self, t: f64, dt: f64, x: &mut [f64], dw: &[f64]) {
        let log = self.model.coords == Coordinates::Log;
        match self.model.dynamics {
            Dynamics::DriftedBm { b, sigma } => {
                for (xi, w) in x.iter_mut().zip(dw) {
                    *xi += b * dt + sigma * w;
                }
            }
            Dynamics::Gbm { r, sigma } => {
                if log {
                    x[0] += (r - 0.5 * sigma * sigma) * dt + sigma * dw[0];
                } else {
                    x[0] += r * x[0] * dt + sigma * x[0] * dw[0];
                }
            }
            Dynamics::Cev { r, sigma, beta } => {
                let s = x[0];
                x[0] += r * s * dt + sigma * s.max(0.0).powf(beta) * dw[0];
            }
            Dynamics::Heston { r, kappa, theta, xi, rho } => {
                let v = x[1].max(0.0);
                let sv = v.sqrt();
                let w2 = rho * dw[0] + (1.0 - rho * rho).sqrt() * dw[1];
                if log {
                    x[0] += (r - 0.5 * v) * dt + sv * dw[0];
                } else {
                    x[0] += r * x[0] * dt + sv * x[0] * dw[0];
                }
                x[1] += kappa * (theta - v) * dt + xi * sv * w2;
            }
            Dynamics::SquaredBessel { delta } => {
                x[0] += delta * dt + 2.0 * x[0].max(0.0).sqrt() * dw[0];
            }
            Dynamics::SquaredBm => {
                x[0] += dt + 2.0 * x[0].max(0.0).sqrt() * dw[0];
            }
            Dynamics::QuantileDriftBm { shift, .. } => {
                x[0] += shift * ((t + dt).sqrt() - t.sqrt()) + dw[0];
            }
            Dynamics::PoissonMartingale { rate } => {
                x[0] += rate * dt;
            }
            Dynamics::JumpDiffusion { b, sigma, .. } => {
                x[0] += b * dt + sigma * dw[0];
            }
        }
    }
}

/// Small-time limit `L = sigma(0, x0)` of the diffusion coefficient.
pub fn small_time_matrix(model: &ModelSpec) -> Result<DMatrix<f64>> {
    if model.kind == ModelKind::PoissonMartingale {
        return Err(Error::UnsupportedModel("PoissonMartingale has no diffusion part".into()));
    }
    Ok(model.coefficients().diffusion(0.0, &model.x0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ItemStatus {
    Holds,
    HoldsLocally,
    Violated,
    NotCheckable,
}

impl ItemStatus {
    pub fn is_satisfied(self) -> bool {
        matches!(self, ItemStatus::Holds | ItemStatus::HoldsLocally)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemCheck {
    pub item: u8,
    pub status: ItemStatus,
    pub note: String,
}

/// Per-item admissibility of a model for the small-time limit theorems.
///
/// `items` covers the six conditions on a continuous semimartingale (for jump
/// models, on its continuous part); `jump_items` the three conditions on the
/// jump part and is empty for continuous models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub kind: ModelKind,
    pub horizon: f64,
    pub continuous_paths: bool,
    pub items: Vec<ItemCheck>,
    pub jump_items: Vec<ItemCheck>,
    /// Heston only; flagged, never enforced.
    pub feller: Option<bool>,
    /// Drift bounded and diffusion a deterministic invertible function of time,
    /// as the explicit probability bounds require.
    pub girsanov_scope: bool,
    /// Admissibility for the ATM slope bounds (deterministic volatility of the
    /// log price); reported as not checkable outside that scope.
    pub slope_bound_scope: ItemStatus,
}

impl AdmissibilityReport {
    /// True when every item holds (globally or locally).
    pub fn clt_applies(&self) -> bool {
        self.items.iter().chain(&self.jump_items).all(|c| c.status.is_satisfied())
    }

    pub fn status(&self, item: u8) -> Option<ItemStatus> {
        self.items.iter().find(|c| c.item == item).map(|c| c.status)
    }

    pub fn violated(&self) -> Vec<u8> {
        self.items.iter().filter(|c| c.status == ItemStatus::Violated).map(|c| c.item).collect()
    }
}

fn item(item: u8, status: ItemStatus, note: &str) -> ItemCheck {
    ItemCheck { item, status, note: note.to_string() }
}

/// Checks the catalog model against the six small-time assumptions (and the
/// three jump assumptions for jump models) on `[0, horizon]`.
pub fn check_assumptions(model: &ModelSpec, horizon: f64) -> AdmissibilityReport {
    use ItemStatus::*;

    let continuous_paths = !matches!(model.kind, ModelKind::PoissonMartingale | ModelKind::JumpDiffusion);
    let girsanov_scope = match model.dynamics {
        Dynamics::DriftedBm { sigma, .. } | Dynamics::Gbm { sigma, .. } => sigma > 0.0,
        Dynamics::JumpDiffusion { sigma, .. } => sigma > 0.0,
        _ => false,
    };
    let slope_bound_scope = match model.dynamics {
        Dynamics::Gbm { sigma, .. } if sigma > 0.0 => Holds,
        _ => NotCheckable,
    };
    let mut report = AdmissibilityReport {
        kind: model.kind,
        horizon,
        continuous_paths,
        items: Vec::new(),
        jump_items: Vec::new(),
        feller: model.feller_condition(),
        girsanov_scope,
        slope_bound_scope,
    };

    if !(horizon > 0.0 && horizon.is_finite()) {
        report.items = (1..=6).map(|i| item(i, NotCheckable, "non-positive horizon")).collect();
        return report;
    }

    let start = item(1, Holds, "deterministic initial state");
    let abs_cont = item(2, Holds, "finite-variation part is absolutely continuous");
    let cov = item(4, Holds, "covariation has a density sigma sigma^T");
    let cont = item(6, Holds, "sigma is continuous at (0, x0)");

    let (drift, diff) = match model.dynamics {
        Dynamics::DriftedBm { .. } | Dynamics::JumpDiffusion { .. } | Dynamics::PoissonMartingale { .. } => {
            (item(3, Holds, "constant drift"), item(5, Holds, "constant diffusion"))
        }
        Dynamics::Gbm { .. } => match model.coords {
            Coordinates::Log => (item(3, Holds, "constant drift"), item(5, Holds, "constant diffusion")),
            Coordinates::Price => (
                item(3, HoldsLocally, "drift r S bounded until S leaves a neighbourhood of S0"),
                item(5, HoldsLocally, "diffusion sigma S bounded until S leaves a neighbourhood of S0"),
            ),
        },
        Dynamics::Cev { .. } => (
            item(3, HoldsLocally, "drift r S bounded near S0"),
            item(5, HoldsLocally, "diffusion sigma S^beta bounded near S0"),
        ),
        Dynamics::Heston { .. } => (
            item(3, HoldsLocally, "drift bounded until the state leaves a neighbourhood of x0"),
            item(5, HoldsLocally, "sqrt(v) bounded until the state leaves a neighbourhood of x0"),
        ),
        Dynamics::SquaredBessel { .. } | Dynamics::SquaredBm => {
            (item(3, Holds, "constant drift"), item(5, HoldsLocally, "2 sqrt(x) bounded near x0"))
        }
        Dynamics::QuantileDriftBm { .. } => {
            (item(3, Violated, "drift q / (2 sqrt(t)) is unbounded as t -> 0"), item(5, Holds, "unit diffusion"))
        }
    };
    report.items = vec![start, abs_cont, drift, cov, diff, cont];

    if !continuous_paths {
        report.jump_items = vec![
            item(1, Holds, "continuous part satisfies the continuous assumptions"),
            item(2, Holds, "finite-activity Poisson random measure with deterministic jump sizes"),
            item(3, Holds, "finite activity: E|Pi - mu|([0, t] x B1) <= 2 lambda t = o(sqrt t)"),
        ];
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn gbm_small_time_matrix_in_log_coordinates() {
        let m = ModelSpec::gbm(100.0, 0.05, 0.2).unwrap().in_log_coords().unwrap();
        let l = small_time_matrix(&m).unwrap();
        assert_eq!(l.shape(), (1, 1));
        assert_eq!(l[(0, 0)], 0.2);
    }

    #[test]
    fn squared_bm_is_degenerate_at_zero() {
        let l = small_time_matrix(&ModelSpec::squared_bm().unwrap()).unwrap();
        assert_eq!(l[(0, 0)], 0.0);
    }

    #[test]
    fn heston_small_time_matrix_uses_initial_variance() {
        let p = HestonParams { r: 0.0, kappa: 1.5, theta: 0.04, xi: 0.3, rho: -0.7 };
        let m = ModelSpec::heston(100.0, 0.04, p).unwrap().in_log_coords().unwrap();
        let l = small_time_matrix(&m).unwrap();
        assert_eq!(l.shape(), (2, 2));
        assert!((l[(0, 0)] - 0.2).abs() < 1e-15);
        assert_eq!(l[(0, 1)], 0.0);
        assert!((l[(1, 0)] - (-0.7 * 0.3 * 0.2)).abs() < 1e-15);
    }

    #[test]
    fn poisson_martingale_has_no_small_time_matrix() {
        let m = ModelSpec::poisson_martingale(1.0).unwrap();
        assert!(matches!(small_time_matrix(&m), Err(Error::UnsupportedModel(_))));
    }

    #[test]
    fn small_time_matrix_matches_analytic_sigma() {
        let cases: Vec<(ModelSpec, f64)> = vec![
            (ModelSpec::drifted_bm(0.5, 1.3).unwrap(), 1.3),
            (ModelSpec::gbm(50.0, 0.01, 0.3).unwrap(), 15.0),
            (ModelSpec::cev(4.0, 0.0, 0.5, 0.5).unwrap(), 1.0),
            (ModelSpec::squared_bessel(2.0, 4.0).unwrap(), 4.0),
            (ModelSpec::quantile_drift_bm(0.25).unwrap(), 1.0),
            (ModelSpec::jump_diffusion(0.3, 0.7, 2.0, JumpLaw::Uniform { a: 0.2 }).unwrap(), 0.7),
        ];
        for (m, expected) in cases {
            assert_eq!(small_time_matrix(&m).unwrap()[(0, 0)], expected, "{}", m.kind());
        }
    }

    #[test]
    fn drifted_bm_satisfies_every_item() {
        let r = check_assumptions(&ModelSpec::drifted_bm(0.5, 1.0).unwrap(), 1.0);
        assert!(r.items.iter().all(|c| c.status == ItemStatus::Holds));
        assert!(r.clt_applies());
        assert!(r.girsanov_scope);
    }

    #[test]
    fn quantile_drift_violates_bounded_drift() {
        let r = check_assumptions(&ModelSpec::quantile_drift_bm(0.25).unwrap(), 1.0);
        assert_eq!(r.status(3), Some(ItemStatus::Violated));
        assert_eq!(r.violated(), vec![3]);
        assert!(!r.clt_applies());
    }

    #[test]
    fn squared_bessel_items_hold_with_degenerate_limit() {
        let m = ModelSpec::squared_bessel(1.0, 0.0).unwrap();
        let r = check_assumptions(&m, 1.0);
        assert!(r.clt_applies());
        assert_eq!(small_time_matrix(&m).unwrap()[(0, 0)], 0.0);
    }

    #[test]
    fn check_assumptions_is_total_and_deterministic() {
        let p = HestonParams { r: 0.0, kappa: 1.5, theta: 0.04, xi: 0.3, rho: -0.7 };
        let models = vec![
            ModelSpec::drifted_bm(0.1, 1.0).unwrap(),
            ModelSpec::gbm(1.0, 0.0, 0.2).unwrap(),
            ModelSpec::cev(1.0, 0.0, 0.2, 0.5).unwrap(),
            ModelSpec::heston(1.0, 0.04, p).unwrap(),
            ModelSpec::squared_bessel(2.0, 0.0).unwrap(),
            ModelSpec::squared_bm().unwrap(),
            ModelSpec::quantile_drift_bm(0.4).unwrap(),
            ModelSpec::poisson_martingale(1.0).unwrap(),
            ModelSpec::jump_diffusion(0.3, 1.0, 5.0, JumpLaw::TwoPoint { a: 0.4 }).unwrap(),
        ];
        for m in &models {
            let a = check_assumptions(m, 0.5);
            assert_eq!(a, check_assumptions(m, 0.5));
            assert_eq!(a.items.len(), 6);
            assert_eq!(a.jump_items.is_empty(), a.continuous_paths);
        }
        assert_eq!(check_assumptions(&models[3], 1.0).feller, Some(true));
    }

    #[test]
    fn json_round_trip_and_unknown_keys() {
        let m = ModelSpec::gbm(100.0, 0.05, 0.2).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"kind":"GBM","params":{"r":0.05,"sigma":0.2},"x0":[100.0],"dim":1}"#);
        let back: ModelSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);

        let extra = r#"{"kind":"GBM","params":{"r":0.05,"sigma":0.2},"x0":[100.0],"dim":1,"foo":1}"#;
        assert!(serde_json::from_str::<ModelSpec>(extra).is_err());
        let bad_param = r#"{"kind":"GBM","params":{"r":0.05,"vol":0.2},"x0":[100.0],"dim":1}"#;
        assert!(serde_json::from_str::<ModelSpec>(bad_param).is_err());
        let log = r#"{"kind":"GBM","params":{"r":0.05,"sigma":0.2},"x0":[0.0],"dim":1,"coords":"log"}"#;
        assert_eq!(serde_json::from_str::<ModelSpec>(log).unwrap().coords(), Coordinates::Log);
    }

    #[test]
    fn invariants_are_enforced() {
        assert!(ModelSpec::cev(1.0, 0.0, 0.2, 1.5).is_err());
        assert!(ModelSpec::cev(1.0, 0.0, 0.2, 0.0).is_err());
        assert!(ModelSpec::quantile_drift_bm(1.0).is_err());
        assert!(ModelSpec::squared_bessel(-1.0, 0.0).is_err());
        assert!(ModelSpec::gbm(1.0, 0.0, -0.2).is_err());
        assert!(ModelSpec::drifted_bm_nd(0.0, 1.0, 0).is_err());
        assert!(ModelSpec::new(ModelKind::GBM, params_of(&[("r", 0.0), ("sigma", 0.2)]), vec![1.0], 2).is_err());
        assert!(ModelSpec::with_coords(
            ModelKind::CEV,
            params_of(&[("r", 0.0), ("sigma", 0.2), ("beta", 0.5)]),
            vec![1.0],
            1,
            Coordinates::Log
        )
        .is_err());
    }

    #[test]
    fn euler_step_agrees_with_coefficients() {
        let p = HestonParams { r: 0.03, kappa: 1.5, theta: 0.04, xi: 0.3, rho: -0.7 };
        let heston = ModelSpec::heston(100.0, 0.04, p).unwrap();
        let models = [
            ModelSpec::gbm(100.0, 0.05, 0.2).unwrap(),
            ModelSpec::cev(2.0, 0.01, 0.3, 0.7).unwrap(),
            heston.clone(),
            heston.in_log_coords().unwrap(),
            ModelSpec::squared_bessel(2.0, 1.0).unwrap(),
            ModelSpec::drifted_bm_nd(0.5, 1.1, 3).unwrap(),
        ];
        for m in &models {
            let c = m.coefficients();
            let (t, dt) = (0.3, 1e-3);
            let dw: Vec<f64> = (0..m.noise_dim()).map(|k| 0.01 * (k as f64 + 1.0)).collect();
            let mut x = m.x0().to_vec();
            c.euler_step(t, dt, &mut x, &dw);
            let b = c.drift(t, m.x0());
            let s = c.diffusion(t, m.x0());
            for i in 0..m.dim() {
                let mut expected = m.x0()[i] + b[i] * dt;
                for k in 0..m.noise_dim() {
                    expected += s[(i, k)] * dw[k];
                }
                assert!((x[i] - expected).abs() < 1e-12, "{} coord {i}", m.kind());
            }
        }
    }

    #[test]
    fn jump_law_sample_mean_is_zero() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for law in [JumpLaw::TwoPoint { a: 0.4 }, JumpLaw::Uniform { a: 0.4 }] {
            let n = 1_000_000;
            let mean = (0..n).map(|_| law.sample(&mut rng)).sum::<f64>() / n as f64;
            let se = (law.variance() / n as f64).sqrt();
            assert!(mean.abs() < 4.0 * se, "{law:?}: mean {mean}, se {se}");
        }
    }
}
