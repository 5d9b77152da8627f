//! Small-time central limit behaviour of `f(X_t)`.
//!
//! For an admissible model started at `x0` with small-time diffusion limit
//! `L` and a mapping `f` differentiable at `x0`,
//! `(f(X_t) - f(x0)) / sqrt(t)` converges in law to `N(0, V)` with
//! `V = Df(x0) L (Df(x0) L)^T`. On the path level,
//! `Y^u_t = (f(X_{ut}) - f(x0)) / sqrt(u)` converges to a Brownian motion with
//! covariance `V`. [`clt_check`] and [`fclt_check`] compare Monte Carlo samples
//! with these limits; [`ldp_rate`] evaluates the small-time rate function of a
//! one-dimensional diffusion.
//!
//! Tightness of the rescaled paths is not testable from finitely many paths;
//! [`fclt_check`] covers finite-dimensional marginals and the covariance
//! structure only.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{small_time_matrix, ModelSpec};
use crate::quad;
use crate::simulate::{derive_seed, simulate_paths, simulate_terminal, McSample, SimConfig};
use crate::stats::{self, cramer_wold_directions, ks_one_sample, normal_cdf, KsReport};

/// Relative eigenvalue threshold below which `V` is declared degenerate.
pub const TOL_PSD: f64 = 1e-10;
pub const DEFAULT_T_SCHEDULE: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];
pub const DEFAULT_PATHS: usize = 100_000;
/// Standard errors allowed in covariance and orthogonality checks.
pub const FCLT_SE_MULTIPLIER: f64 = 5.0;
/// Standard errors allowed in the jump-path fraction check.
pub const JUMP_SE_MULTIPLIER: f64 = 3.0;
const LDP_TOLERANCE: f64 = 1e-10;
const LDP_POSITIVITY_SAMPLES: usize = 1001;

/// Catalog of mappings `f: R^m -> R^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mapping {
    Identity,
    /// Coordinatewise logarithm.
    Log,
    /// Coordinatewise square.
    Square,
    /// Projection onto one coordinate.
    Coordinate(usize),
    /// `x -> A x` with `A` given by rows.
    Linear(Vec<Vec<f64>>),
    /// `outer ∘ inner`.
    Compose(Box<Mapping>, Box<Mapping>),
}

impl Mapping {
    /// Logarithm of the first coordinate, the usual map for price models.
    pub fn log_price() -> Self {
        Mapping::Compose(Box::new(Mapping::Log), Box::new(Mapping::Coordinate(0)))
    }

    pub fn compose(outer: Mapping, inner: Mapping) -> Self {
        Mapping::Compose(Box::new(outer), Box::new(inner))
    }

    pub fn name(&self) -> String {
        match self {
            Mapping::Identity => "identity".into(),
            Mapping::Log => "log".into(),
            Mapping::Square => "square".into(),
            Mapping::Coordinate(i) => format!("x{i}"),
            Mapping::Linear(a) => format!("linear{}x{}", a.len(), a.first().map_or(0, Vec::len)),
            Mapping::Compose(o, i) => format!("{}∘{}", o.name(), i.name()),
        }
    }

    /// Output dimension for inputs of dimension `m`.
    pub fn output_dim(&self, m: usize) -> Result<usize> {
        match self {
            Mapping::Identity | Mapping::Log | Mapping::Square => Ok(m),
            Mapping::Coordinate(i) if *i < m => Ok(1),
            Mapping::Coordinate(i) => Err(Error::ShapeMismatch(format!("coordinate {i} of a {m}-vector"))),
            Mapping::Linear(a) => {
                if a.is_empty() || a.iter().any(|r| r.len() != m) {
                    Err(Error::ShapeMismatch(format!("linear map does not take {m}-vectors")))
                } else {
                    Ok(a.len())
                }
            }
            Mapping::Compose(o, i) => o.output_dim(i.output_dim(m)?),
        }
    }

    /// `f(x)`, or `None` outside the domain.
    pub fn eval(&self, x: &[f64]) -> Option<Vec<f64>> {
        match self {
            Mapping::Identity => Some(x.to_vec()),
            Mapping::Log => x.iter().map(|&v| (v > 0.0).then(|| v.ln())).collect(),
            Mapping::Square => Some(x.iter().map(|v| v * v).collect()),
            Mapping::Coordinate(i) => x.get(*i).map(|&v| vec![v]),
            Mapping::Linear(a) => Some(a.iter().map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum()).collect()),
            Mapping::Compose(o, i) => o.eval(&i.eval(x)?),
        }
    }

    /// Analytic Jacobian at `x`, `n x m`.
    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let m = x.len();
        let n = self.output_dim(m)?;
        match self {
            Mapping::Identity => Ok(DMatrix::identity(m, m)),
            Mapping::Log => {
                if x.iter().any(|&v| v <= 0.0) {
                    return Err(Error::Domain("log mapping needs a positive point".into()));
                }
                Ok(DMatrix::from_diagonal(&x.iter().map(|v| 1.0 / v).collect::<Vec<_>>().into()))
            }
            Mapping::Square => Ok(DMatrix::from_diagonal(&x.iter().map(|v| 2.0 * v).collect::<Vec<_>>().into())),
            Mapping::Coordinate(i) => Ok(DMatrix::from_fn(1, m, |_, j| if j == *i { 1.0 } else { 0.0 })),
            Mapping::Linear(a) => Ok(DMatrix::from_fn(n, m, |i, j| a[i][j])),
            Mapping::Compose(o, i) => {
                let y = i.eval(x).ok_or_else(|| Error::Domain(format!("{} undefined at the point", i.name())))?;
                Ok(o.jacobian(&y)? * i.jacobian(x)?)
            }
        }
    }
}

/// Central finite-difference Jacobian of `f` at `x`.
pub fn fd_jacobian(mapping: &Mapping, x: &[f64], h: f64) -> Result<DMatrix<f64>> {
    let m = x.len();
    let n = mapping.output_dim(m)?;
    let mut jac = DMatrix::zeros(n, m);
    let mut xp = x.to_vec();
    for j in 0..m {
        let step = h * x[j].abs().max(1.0);
        xp[j] = x[j] + step;
        let up = mapping.eval(&xp);
        xp[j] = x[j] - step;
        let down = mapping.eval(&xp);
        xp[j] = x[j];
        let (up, down) =
            up.zip(down).ok_or_else(|| Error::Domain(format!("{} undefined near the point", mapping.name())))?;
        for i in 0..n {
            jac[(i, j)] = (up[i] - down[i]) / (2.0 * step);
        }
    }
    Ok(jac)
}

/// A mapping together with its analytic Jacobian at the starting point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingSpec {
    pub name: String,
    pub mapping: Mapping,
    pub x0: Vec<f64>,
    #[serde(with = "crate::matrix")]
    pub df_at_x0: DMatrix<f64>,
}

impl MappingSpec {
    pub fn new(mapping: Mapping, x0: &[f64]) -> Result<Self> {
        let df_at_x0 = mapping.jacobian(x0)?;
        Ok(MappingSpec { name: mapping.name(), mapping, x0: x0.to_vec(), df_at_x0 })
    }

    /// Largest relative deviation between the analytic and finite-difference
    /// Jacobians.
    pub fn jacobian_check(&self) -> Result<f64> {
        let fd = fd_jacobian(&self.mapping, &self.x0, 1e-6)?;
        let scale = self.df_at_x0.amax().max(1.0);
        Ok((&fd - &self.df_at_x0).amax() / scale)
    }

    pub fn f_at_x0(&self) -> Vec<f64> {
        self.mapping.eval(&self.x0).expect("jacobian exists, so f is defined at x0")
    }
}

/// Centered Gaussian limit `N(0, V)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianLimit {
    #[serde(with = "crate::matrix")]
    pub v: DMatrix<f64>,
    /// Eigenvalues of `V`, ascending.
    pub eigenvalues: Vec<f64>,
}

impl GaussianLimit {
    pub fn new(v: DMatrix<f64>) -> Result<Self> {
        if !v.is_square() {
            return Err(Error::ShapeMismatch(format!("covariance is {}x{}", v.nrows(), v.ncols())));
        }
        let sym = (&v + v.transpose()) * 0.5;
        let mut eigenvalues: Vec<f64> = SymmetricEigen::new(sym.clone()).eigenvalues.iter().copied().collect();
        eigenvalues.sort_by(f64::total_cmp);
        Ok(GaussianLimit { v: sym, eigenvalues })
    }

    pub fn dim(&self) -> usize {
        self.v.nrows()
    }

    fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// Smallest eigenvalue below `TOL_PSD` times the largest (including
    /// `V = 0`).
    pub fn is_degenerate(&self) -> bool {
        let max = self.max_eigenvalue();
        max <= 0.0 || self.eigenvalues[0] < TOL_PSD * max
    }

    /// `d^T V d`.
    pub fn variance_along(&self, d: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                acc += d[i] * self.v[(i, j)] * d[j];
            }
        }
        acc
    }

    /// Whether the projection on `d` has (relatively) vanishing variance.
    pub fn is_degenerate_along(&self, d: &[f64]) -> bool {
        let max = self.max_eigenvalue();
        max <= 0.0 || self.variance_along(d) < TOL_PSD * max
    }
}

/// `V = Df L (Df L)^T`, symmetrized.
pub fn limit_covariance(mapping: &MappingSpec, l: &DMatrix<f64>) -> Result<GaussianLimit> {
    let df = &mapping.df_at_x0;
    if df.ncols() != l.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "Jacobian is {}x{} but L is {}x{}",
            df.nrows(),
            df.ncols(),
            l.nrows(),
            l.ncols()
        )));
    }
    let a = df * l;
    GaussianLimit::new(&a * a.transpose())
}

fn normalize(
    sample: &McSample,
    mapping: &MappingSpec,
    scale: f64,
    dim: usize,
    time_col: usize,
) -> Result<Vec<Vec<f64>>> {
    let f0 = mapping.f_at_x0();
    sample
        .rows()
        .enumerate()
        .map(|(path, row)| {
            let x = &row[time_col * dim..(time_col + 1) * dim];
            let y =
                mapping.mapping.eval(x).ok_or_else(|| Error::MappingDomain { mapping: mapping.name.clone(), path })?;
            Ok(y.iter().zip(&f0).map(|(a, b)| (a - b) / scale).collect())
        })
        .collect()
}

/// Rows `(f(X_t) - f(x0)) / sqrt(t)`.
pub fn normalized_increments(model: &ModelSpec, mapping: &Mapping, t: f64, cfg: &SimConfig) -> Result<McSample> {
    let spec = MappingSpec::new(mapping.clone(), model.x0())?;
    let raw = simulate_terminal(model, t, cfg)?;
    let rows = normalize(&raw, &spec, t.sqrt(), model.dim(), 0)?;
    let n = spec.mapping.output_dim(model.dim())?;
    let labels = (0..n).map(|i| format!("y{i}@{t}")).collect();
    McSample::from_parts(rows.concat(), n, labels, raw.jump_counts().map(<[u64]>::to_vec), raw.meta().clone())
}

fn project(sample: &McSample, d: &[f64]) -> Vec<f64> {
    sample.rows().map(|r| r.iter().zip(d).map(|(a, b)| a * b).sum()).collect()
}

fn quantile_abs(xs: &[f64], p: f64) -> f64 {
    let mut a: Vec<f64> = xs.iter().map(|v| v.abs()).collect();
    a.sort_by(f64::total_cmp);
    let idx = ((p * a.len() as f64).ceil() as usize).clamp(1, a.len()) - 1;
    a[idx]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Consistent,
    Inconsistent,
    Degenerate,
}

impl std::str::FromStr for Verdict {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "consistent" => Ok(Verdict::Consistent),
            "inconsistent" => Ok(Verdict::Inconsistent),
            "degenerate" => Ok(Verdict::Degenerate),
            _ => Err(format!("unknown verdict `{s}`")),
        }
    }
}

/// One `(t, direction)` cell: a KS test for non-degenerate projections,
/// otherwise the 99th percentile of `|d . Y|`, which must shrink with `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltCell {
    pub t: f64,
    pub direction_id: usize,
    pub variance: f64,
    pub ks: Option<KsReport>,
    pub abs_q99: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub model: ModelSpec,
    pub mapping: MappingSpec,
    pub t_schedule: Vec<f64>,
    pub directions: Vec<Vec<f64>>,
    pub limit: GaussianLimit,
    pub cells: Vec<CltCell>,
    pub verdict: Verdict,
}

impl CltReport {
    pub fn cells_at(&self, t: f64) -> impl Iterator<Item = &CltCell> {
        self.cells.iter().filter(move |c| c.t == t)
    }

    /// CSV with columns `t, direction_id, ks_stat, critical, pass`; degenerate
    /// cells leave the statistic empty and report `skipped`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "direction_id", "ks_stat", "critical", "pass"])?;
        for c in &self.cells {
            let (stat, crit, pass) = match &c.ks {
                Some(k) => (k.statistic.to_string(), k.critical.to_string(), k.pass.to_string()),
                None => (String::new(), String::new(), "skipped".to_string()),
            };
            w.write_record([c.t.to_string(), c.direction_id.to_string(), stat, crit, pass])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_decreasing(name: &str, s: &[f64], upper: f64) -> Result<()> {
    if s.is_empty() {
        return Err(Error::InvalidConfig(format!("{name} is empty")));
    }
    if s.iter().any(|t| !(*t > 0.0 && *t < upper)) || s.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidConfig(format!("{name} must be strictly decreasing within (0, {upper})")));
    }
    Ok(())
}

/// Tests the normalized increments against `N(0, V)` along every Cramér–Wold
/// direction at every time. Time `t_schedule[i]` uses seed
/// `derive_seed(cfg.seed, i)`. The verdict is `degenerate` when `V` is,
/// otherwise `consistent` iff every KS test at the smallest time passes.
pub fn clt_check(model: &ModelSpec, mapping: &Mapping, t_schedule: &[f64], cfg: &SimConfig) -> Result<CltReport> {
    check_decreasing("t_schedule", t_schedule, f64::INFINITY)?;
    let spec = MappingSpec::new(mapping.clone(), model.x0())?;
    let limit = limit_covariance(&spec, &small_time_matrix(model)?)?;
    let directions = cramer_wold_directions(limit.dim());
    let mut cells = Vec::new();
    for (i, &t) in t_schedule.iter().enumerate() {
        let run = cfg.clone().with_seed(derive_seed(cfg.seed, i as u64));
        let y = normalized_increments(model, mapping, t, &run)?;
        let row: Vec<CltCell> = directions
            .par_iter()
            .enumerate()
            .map(|(id, d)| {
                let proj = project(&y, d);
                let variance = limit.variance_along(d);
                if limit.is_degenerate_along(d) {
                    Ok(CltCell { t, direction_id: id, variance, ks: None, abs_q99: Some(quantile_abs(&proj, 0.99)) })
                } else {
                    let sd = variance.sqrt();
                    let ks = ks_one_sample(&proj, |x| normal_cdf(x / sd))?;
                    Ok(CltCell { t, direction_id: id, variance, ks: Some(ks), abs_q99: None })
                }
            })
            .collect::<Result<_>>()?;
        cells.extend(row);
    }
    let t_min = *t_schedule.last().expect("non-empty schedule");
    let verdict = if limit.is_degenerate() {
        Verdict::Degenerate
    } else if cells.iter().filter(|c| c.t == t_min).all(|c| c.ks.as_ref().is_none_or(|k| k.pass)) {
        Verdict::Consistent
    } else {
        Verdict::Inconsistent
    };
    Ok(CltReport {
        model: model.clone(),
        mapping: spec,
        t_schedule: t_schedule.to_vec(),
        directions,
        limit,
        cells,
        verdict,
    })
}

/// Sample covariance of two series with a plug-in standard error.
fn covariance_with_se(a: &[f64], b: &[f64]) -> (f64, f64) {
    let n = a.len() as f64;
    let (ma, mb) = (stats::mean(a), stats::mean(b));
    let prods: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect();
    let cov = prods.iter().sum::<f64>() / (n - 1.0);
    (cov, stats::std_error(&prods))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub s: f64,
    pub t: f64,
    pub estimate: f64,
    pub target: f64,
    pub std_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpFractionCheck {
    pub horizon: f64,
    pub fraction: f64,
    pub target: f64,
    pub std_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcltCell {
    pub u: f64,
    /// KS of `Y_t` against `N(0, t V)`, one per grid time.
    pub marginals: Vec<KsReport>,
    /// `Cov(Y_s, Y_t)` against `V min(s, t)` for `s <= t`.
    pub covariances: Vec<MomentCheck>,
    /// `Corr(Y_s, Y_t - Y_s)` against 0 for `s < t`.
    pub orthogonality: Vec<MomentCheck>,
    pub jump_fraction: Option<JumpFractionCheck>,
}

impl FcltCell {
    pub fn pass(&self) -> bool {
        self.marginals.iter().all(|k| k.pass)
            && self.covariances.iter().all(|c| c.pass)
            && self.orthogonality.iter().all(|c| c.pass)
            && self.jump_fraction.as_ref().is_none_or(|j| j.pass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcltReport {
    pub model: ModelSpec,
    pub mapping: MappingSpec,
    pub u_schedule: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub v: f64,
    pub cells: Vec<FcltCell>,
    pub pass: bool,
}

impl FcltReport {
    /// CSV with columns `u, check, s, t, estimate, target, tolerance, pass`;
    /// KS rows carry the statistic and critical value.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["u", "check", "s", "t", "estimate", "target", "tolerance", "pass"])?;
        for cell in &self.cells {
            let u = cell.u.to_string();
            for (k, t) in cell.marginals.iter().zip(&self.t_grid) {
                w.write_record([
                    u.clone(),
                    "marginal_ks".into(),
                    String::new(),
                    t.to_string(),
                    k.statistic.to_string(),
                    "0".into(),
                    k.critical.to_string(),
                    k.pass.to_string(),
                ])?;
            }
            for (name, checks) in [("covariance", &cell.covariances), ("orthogonality", &cell.orthogonality)] {
                for c in checks {
                    w.write_record([
                        u.clone(),
                        name.into(),
                        c.s.to_string(),
                        c.t.to_string(),
                        c.estimate.to_string(),
                        c.target.to_string(),
                        (FCLT_SE_MULTIPLIER * c.std_error).to_string(),
                        c.pass.to_string(),
                    ])?;
                }
            }
            if let Some(j) = &cell.jump_fraction {
                w.write_record([
                    u.clone(),
                    "jump_fraction".into(),
                    String::new(),
                    j.horizon.to_string(),
                    j.fraction.to_string(),
                    j.target.to_string(),
                    (JUMP_SE_MULTIPLIER * j.std_error).to_string(),
                    j.pass.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Process-level check of `Y^u_t = (f(X_{ut}) - f(x0)) / sqrt(u)` on `t_grid`
/// for each `u`, for scalar mappings. Scale `u_schedule[i]` uses seed
/// `derive_seed(cfg.seed, i)`. For jump models the fraction of paths with a
/// jump before `u * max(t_grid)` is compared with `1 - exp(-lambda u T)`.
pub fn fclt_check(
    model: &ModelSpec,
    mapping: &Mapping,
    u_schedule: &[f64],
    t_grid: &[f64],
    cfg: &SimConfig,
) -> Result<FcltReport> {
    check_decreasing("u_schedule", u_schedule, 1.0)?;
    if t_grid.is_empty() || t_grid[0] <= 0.0 || t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidConfig("t_grid must be positive and strictly increasing".into()));
    }
    let spec = MappingSpec::new(mapping.clone(), model.x0())?;
    let limit = limit_covariance(&spec, &small_time_matrix(model)?)?;
    if limit.dim() != 1 {
        return Err(Error::ShapeMismatch(format!(
            "process-level check needs a scalar mapping, got dimension {}",
            limit.dim()
        )));
    }
    if limit.is_degenerate() {
        return Err(Error::DegenerateLimit);
    }
    let v = limit.v[(0, 0)];
    let intensity = model.coefficients().jump().map(|j| j.intensity);
    let t_last = *t_grid.last().expect("non-empty grid");

    let mut cells = Vec::with_capacity(u_schedule.len());
    for (i, &u) in u_schedule.iter().enumerate() {
        let mut grid = vec![0.0];
        grid.extend(t_grid.iter().map(|t| u * t));
        let run = cfg.clone().with_seed(derive_seed(cfg.seed, i as u64)).with_grid(grid);
        let paths = simulate_paths(model, &run)?;
        // series[k] = Y at t_grid[k]
        let series: Vec<Vec<f64>> = (1..=t_grid.len())
            .map(|col| {
                normalize(&paths, &spec, u.sqrt(), model.dim(), col)
                    .map(|rows| rows.into_iter().map(|r| r[0]).collect())
            })
            .collect::<Result<_>>()?;
        let n = paths.n_rows() as f64;

        let marginals = series
            .iter()
            .zip(t_grid)
            .map(|(y, &t)| {
                let sd = (t * v).sqrt();
                ks_one_sample(y, |x| normal_cdf(x / sd))
            })
            .collect::<Result<Vec<_>>>()?;

        let mut covariances = Vec::new();
        let mut orthogonality = Vec::new();
        for a in 0..t_grid.len() {
            for b in a..t_grid.len() {
                let (cov, se) = covariance_with_se(&series[a], &series[b]);
                let target = v * t_grid[a];
                covariances.push(MomentCheck {
                    s: t_grid[a],
                    t: t_grid[b],
                    estimate: cov,
                    target,
                    std_error: se,
                    pass: (cov - target).abs() <= FCLT_SE_MULTIPLIER * se,
                });
                if b > a {
                    let inc: Vec<f64> = series[b].iter().zip(&series[a]).map(|(y, x)| y - x).collect();
                    let (c, _) = covariance_with_se(&series[a], &inc);
                    let corr = c / (stats::sample_variance(&series[a]) * stats::sample_variance(&inc)).sqrt();
                    let se = 1.0 / n.sqrt();
                    orthogonality.push(MomentCheck {
                        s: t_grid[a],
                        t: t_grid[b],
                        estimate: corr,
                        target: 0.0,
                        std_error: se,
                        pass: corr.abs() <= FCLT_SE_MULTIPLIER * se,
                    });
                }
            }
        }

        let jump_fraction = match (intensity, paths.jump_counts()) {
            (Some(lambda), Some(counts)) => {
                let horizon = u * t_last;
                let fraction = counts.iter().filter(|&&c| c > 0).count() as f64 / n;
                let target = -(-lambda * horizon).exp_m1();
                let std_error = (target * (1.0 - target) / n).sqrt();
                Some(JumpFractionCheck {
                    horizon,
                    fraction,
                    target,
                    std_error,
                    pass: (fraction - target).abs() <= JUMP_SE_MULTIPLIER * std_error,
                })
            }
            _ => None,
        };
        cells.push(FcltCell { u, marginals, covariances, orthogonality, jump_fraction });
    }
    let pass = cells.iter().all(FcltCell::pass);
    Ok(FcltReport {
        model: model.clone(),
        mapping: spec,
        u_schedule: u_schedule.to_vec(),
        t_grid: t_grid.to_vec(),
        v,
        cells,
        pass,
    })
}

/// Small-time rate function of `dX = sigma(X) dW` at `x0 + eps`:
/// `I = (int_{x0}^{x0+eps} du / sigma(u))^2 / 2`.
pub fn ldp_rate(sigma: impl Fn(f64) -> f64, x0: f64, eps: f64) -> Result<f64> {
    if !(x0.is_finite() && eps.is_finite()) {
        return Err(Error::Domain("x0 and eps must be finite".into()));
    }
    if eps == 0.0 {
        return Ok(0.0);
    }
    for k in 0..LDP_POSITIVITY_SAMPLES {
        let u = x0 + eps * k as f64 / (LDP_POSITIVITY_SAMPLES - 1) as f64;
        let s = sigma(u);
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Domain(format!("sigma({u}) = {s} is not positive")));
        }
    }
    let integral = quad::integrate(|u| 1.0 / sigma(u), x0, x0 + eps, LDP_TOLERANCE)?;
    Ok(0.5 * integral * integral)
}
