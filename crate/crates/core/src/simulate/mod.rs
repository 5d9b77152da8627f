//! Monte Carlo paths and terminal samples.
//!
//! Work is split into chunks of `chunk_size` paths; chunk `c` draws from
//! [`substream_rng`]`(seed, c)` and writes rows `c * chunk_size ..`. The output
//! is therefore a pure function of `(model, times, config)` regardless of how
//! many workers run the chunks. Chunks run on the ambient rayon pool; see
//! [`worker_pool`].
//!
//! Euler steps: every interval between recorded times is cut into
//! `ceil(dt / h_max)` equal steps, `h_max = max_step` or `1e-4 * t_last`.
//! Jumps are superposed per step by drawing the Poisson count and then the
//! symmetric jump sizes.

mod export;
mod rng;

use rand::{Rng, RngExt};
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use export::{sidecar_path, MAGIC};
pub use rng::{derive_seed, substream_rng, StreamRng};

use crate::error::{Error, Result};
use crate::models::{Coordinates, Dynamics, ModelSpec};

pub const DEFAULT_CHUNK_SIZE: usize = 4096;
/// Default Euler step as a fraction of the last requested time.
pub const DEFAULT_STEP_FRACTION: f64 = 1e-4;
pub const THREADS_ENV: &str = "SMALLTIME_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Scheme {
    #[default]
    EulerMaruyama,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_paths: usize,
    #[serde(default = "default_grid")]
    pub t_grid: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_chunk_size")]
    pub chunk_size: usize,
    /// Overrides the default Euler step `1e-4 * t_last`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_step: Option<f64>,
}

fn default_grid() -> Vec<f64> {
    vec![0.0]
}

fn default_chunk_size() -> usize {
    DEFAULT_CHUNK_SIZE
}

impl SimConfig {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        SimConfig {
            n_paths,
            t_grid: default_grid(),
            seed,
            scheme: Scheme::default(),
            chunk_size: DEFAULT_CHUNK_SIZE,
            max_step: None,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_grid(mut self, t_grid: Vec<f64>) -> Self {
        self.t_grid = t_grid;
        self
    }

    pub fn with_chunk_size(mut self, chunk_size: usize) -> Self {
        self.chunk_size = chunk_size;
        self
    }

    pub fn with_max_step(mut self, h: f64) -> Self {
        self.max_step = Some(h);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::InvalidConfig("n_paths must be positive".into()));
        }
        if self.chunk_size == 0 {
            return Err(Error::InvalidConfig("chunk_size must be positive".into()));
        }
        validate_grid(&self.t_grid)?;
        if let Some(h) = self.max_step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidConfig(format!("max_step must be positive, got {h}")));
            }
        }
        Ok(())
    }
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.first() != Some(&0.0) {
        return Err(Error::InvalidConfig("t_grid must start at 0".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
        return Err(Error::InvalidConfig("t_grid must be strictly increasing and finite".into()));
    }
    Ok(())
}

/// Provenance of a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub config: SimConfig,
    pub model: ModelSpec,
    /// First 16 hex digits of the SHA-256 of the model's JSON form.
    pub model_hash: String,
    /// Times at which the recorded columns were taken.
    pub times: Vec<f64>,
}

/// `n_paths x k` matrix of draws, row-major, with labels and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct McSample {
    values: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
    labels: Vec<String>,
    jump_counts: Option<Vec<u64>>,
    meta: SampleMeta,
}

impl McSample {
    pub(crate) fn from_parts(
        values: Vec<f64>,
        n_cols: usize,
        labels: Vec<String>,
        jump_counts: Option<Vec<u64>>,
        meta: SampleMeta,
    ) -> Result<Self> {
        if n_cols == 0 || !values.len().is_multiple_of(n_cols) || labels.len() != n_cols {
            return Err(Error::ShapeMismatch(format!(
                "{} values, {} columns, {} labels",
                values.len(),
                n_cols,
                labels.len()
            )));
        }
        let n_rows = values.len() / n_cols;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::StepUnstable { path: i / n_cols, time: f64::NAN });
        }
        Ok(McSample { values, n_rows, n_cols, labels, jump_counts, meta })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols + col]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_cols)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Total number of jumps per path, for models with a jump part.
    pub fn jump_counts(&self) -> Option<&[u64]> {
        self.jump_counts.as_deref()
    }

    pub fn meta(&self) -> &SampleMeta {
        &self.meta
    }
}

pub fn model_hash(model: &ModelSpec) -> String {
    let json = serde_json::to_string(model).expect("model specs serialize");
    hex::encode(&Sha256::digest(json.as_bytes())[..8])
}

/// Builds a pool honouring an explicit thread count, else `SMALLTIME_THREADS`,
/// else the available parallelism.
pub fn worker_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let n = match threads {
        Some(n) => n,
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => v.trim().parse().map_err(|_| Error::InvalidConfig(format!("{THREADS_ENV}={v} is not a count")))?,
            Err(_) => std::thread::available_parallelism().map_or(1, usize::from),
        },
    };
    rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build().map_err(|e| Error::InvalidConfig(e.to_string()))
}

fn exact_supported(model: &ModelSpec) -> std::result::Result<(), String> {
    match model.dynamics() {
        Dynamics::Cev { .. } | Dynamics::Heston { .. } | Dynamics::JumpDiffusion { .. } => {
            Err("no exact sampler; use EulerMaruyama".into())
        }
        _ => Ok(()),
    }
}

fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Poisson count by inversion for small means.
fn poisson_count<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    if mean < 30.0 {
        let mut u: f64 = rng.random();
        let mut p = (-mean).exp();
        let mut k = 0u64;
        while u > p {
            u -= p;
            k += 1;
            p *= mean / k as f64;
            if p <= 0.0 {
                break;
            }
        }
        return k;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
}

/// Non-central chi-square with `df` degrees of freedom and non-centrality
/// `lambda`, as a Poisson mixture of central chi-squares.
fn noncentral_chi2<R: Rng + ?Sized>(rng: &mut R, df: f64, lambda: f64) -> f64 {
    let extra = poisson_count(rng, 0.5 * lambda) as f64;
    let shape = 0.5 * df + extra;
    if shape <= 0.0 {
        return 0.0;
    }
    Gamma::new(shape, 2.0).expect("positive shape").sample(rng)
}

struct PathEngine<'a> {
    model: &'a ModelSpec,
    scheme: Scheme,
    h_max: f64,
    /// Recorded times, strictly increasing, all >= 0.
    times: &'a [f64],
}

impl PathEngine<'_> {
    fn n_cols(&self) -> usize {
        self.times.len() * self.model.dim()
    }

    /// Fills one row and returns the number of jumps on the path.
    fn run<R: Rng + ?Sized>(&self, rng: &mut R, row: &mut [f64], path: usize) -> Result<u64> {
        let m = self.model.dim();
        let mut x = self.model.x0().to_vec();
        // underlying Brownian value for the exact squared-BM transition
        let mut w = x[0].max(0.0).sqrt();
        let mut jumps = 0u64;
        let mut t = 0.0;
        let mut dw = vec![0.0; self.model.noise_dim()];
        for (j, &target) in self.times.iter().enumerate() {
            if target > t {
                match self.scheme {
                    Scheme::Exact => jumps += self.exact_transition(rng, t, target, &mut x, &mut w),
                    Scheme::EulerMaruyama => jumps += self.euler(rng, t, target, &mut x, &mut dw),
                }
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::StepUnstable { path, time: target });
                }
                t = target;
            }
            row[j * m..(j + 1) * m].copy_from_slice(&x);
        }
        Ok(jumps)
    }

    fn euler<R: Rng + ?Sized>(&self, rng: &mut R, t0: f64, t1: f64, x: &mut [f64], dw: &mut [f64]) -> u64 {
        let coeffs = self.model.coefficients();
        let n = ((t1 - t0) / self.h_max).ceil().max(1.0) as usize;
        let h = (t1 - t0) / n as f64;
        let sqrt_h = h.sqrt();
        let jump = coeffs.jump();
        let poisson_rate = match self.model.dynamics() {
            Dynamics::PoissonMartingale { rate } => Some(*rate),
            _ => None,
        };
        let mut jumps = 0;
        for k in 0..n {
            let t = t0 + k as f64 * h;
            for d in dw.iter_mut() {
                *d = sqrt_h * standard_normal(rng);
            }
            coeffs.euler_step(t, h, x, dw);
            if let Some(spec) = jump {
                let count = poisson_count(rng, spec.intensity * h);
                for _ in 0..count {
                    x[0] += spec.law.sample(rng);
                }
                jumps += count;
            }
            if let Some(rate) = poisson_rate {
                let count = poisson_count(rng, rate * h);
                x[0] -= count as f64;
                jumps += count;
            }
        }
        jumps
    }

    fn exact_transition<R: Rng + ?Sized>(&self, rng: &mut R, t0: f64, t1: f64, x: &mut [f64], w: &mut f64) -> u64 {
        let dt = t1 - t0;
        let sq = dt.sqrt();
        match *self.model.dynamics() {
            Dynamics::DriftedBm { b, sigma } => {
                for xi in x.iter_mut() {
                    *xi += b * dt + sigma * sq * standard_normal(rng);
                }
            }
            Dynamics::Gbm { r, sigma } => {
                let inc = (r - 0.5 * sigma * sigma) * dt + sigma * sq * standard_normal(rng);
                match self.model.coords() {
                    Coordinates::Log => x[0] += inc,
                    Coordinates::Price => x[0] *= inc.exp(),
                }
            }
            Dynamics::QuantileDriftBm { shift, .. } => {
                x[0] += shift * (t1.sqrt() - t0.sqrt()) + sq * standard_normal(rng);
            }
            Dynamics::PoissonMartingale { rate } => {
                let count = poisson_count(rng, rate * dt);
                x[0] += rate * dt - count as f64;
                return count;
            }
            Dynamics::SquaredBm => {
                *w += sq * standard_normal(rng);
                x[0] = *w * *w;
            }
            Dynamics::SquaredBessel { delta } => {
                x[0] = dt * noncentral_chi2(rng, delta, x[0].max(0.0) / dt);
            }
            Dynamics::Cev { .. } | Dynamics::Heston { .. } | Dynamics::JumpDiffusion { .. } => {
                unreachable!("exact scheme availability is checked before running")
            }
        }
        0
    }
}

fn run_engine(engine: &PathEngine<'_>, cfg: &SimConfig, labels: Vec<String>) -> Result<McSample> {
    let cols = engine.n_cols();
    let mut values = vec![0.0; cfg.n_paths * cols];
    let mut counts = vec![0u64; cfg.n_paths];
    let outcomes: Vec<Result<()>> = values
        .par_chunks_mut(cfg.chunk_size * cols)
        .zip(counts.par_chunks_mut(cfg.chunk_size))
        .enumerate()
        .map(|(chunk, (block, block_counts))| {
            let mut rng = substream_rng(cfg.seed, chunk as u64);
            for (k, (row, count)) in block.chunks_exact_mut(cols).zip(block_counts.iter_mut()).enumerate() {
                *count = engine.run(&mut rng, row, chunk * cfg.chunk_size + k)?;
            }
            Ok(())
        })
        .collect();
    outcomes.into_iter().collect::<Result<()>>()?;

    let has_jumps =
        matches!(engine.model.dynamics(), Dynamics::JumpDiffusion { .. } | Dynamics::PoissonMartingale { .. });
    let meta = SampleMeta {
        config: cfg.clone(),
        model: engine.model.clone(),
        model_hash: model_hash(engine.model),
        times: engine.times.to_vec(),
    };
    McSample::from_parts(values, cols, labels, has_jumps.then_some(counts), meta)
}

fn check_scheme(model: &ModelSpec, scheme: Scheme) -> Result<()> {
    if scheme == Scheme::Exact {
        exact_supported(model).map_err(|reason| Error::SchemeUnavailable { kind: model.kind().to_string(), reason })?;
    }
    Ok(())
}

fn labels_for(model: &ModelSpec, times: &[f64]) -> Vec<String> {
    times.iter().flat_map(|t| (0..model.dim()).map(move |i| format!("x{i}@{t}"))).collect()
}

/// Draws `X_t` on `n_paths` independent paths; one column per state
/// coordinate. `cfg.t_grid` is ignored.
pub fn simulate_terminal(model: &ModelSpec, t: f64, cfg: &SimConfig) -> Result<McSample> {
    cfg.validate()?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidConfig(format!("terminal time must be positive, got {t}")));
    }
    check_scheme(model, cfg.scheme)?;
    let times = [t];
    let engine = PathEngine {
        model,
        scheme: cfg.scheme,
        h_max: cfg.max_step.unwrap_or(DEFAULT_STEP_FRACTION * t),
        times: &times,
    };
    run_engine(&engine, cfg, labels_for(model, &times))
}

/// Simulates full paths on `cfg.t_grid`; the row layout is time-major,
/// `[x(t_0), x(t_1), ...]` with `dim` columns per time.
pub fn simulate_paths(model: &ModelSpec, cfg: &SimConfig) -> Result<McSample> {
    cfg.validate()?;
    let t_last = *cfg.t_grid.last().expect("validated grid is non-empty");
    if cfg.t_grid.len() < 2 {
        return Err(Error::InvalidConfig("t_grid needs at least one positive time".into()));
    }
    check_scheme(model, cfg.scheme)?;
    let engine = PathEngine {
        model,
        scheme: cfg.scheme,
        h_max: cfg.max_step.unwrap_or(DEFAULT_STEP_FRACTION * t_last),
        times: &cfg.t_grid,
    };
    run_engine(&engine, cfg, labels_for(model, &cfg.t_grid))
}
