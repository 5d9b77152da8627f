//! Small-time limit theorems for semimartingale models, checked by simulation.
//!
//! The crate is organised around a closed catalog of models ([`models`]), a
//! reproducible Monte Carlo engine ([`simulate`]) and a set of verification
//! layers built on top of them:
//!
//! - [`clt`]: normalized increments `(f(X_t) - f(x0)) / sqrt(t)`, their Gaussian
//!   limit `V = Df L (Df L)^T`, process-level checks and the small-time rate
//!   function of one-dimensional diffusions.
//! - [`bounds`]: explicit lower/upper envelopes for `P(X_t > X_0)` obtained by a
//!   change of measure and Hölder's inequality.
//! - [`pricing`] and [`skew`]: Black–Scholes analytics, Monte Carlo digitals and
//!   the at-the-money implied volatility slope with its envelopes.
//! - [`stats`]: special functions, Kolmogorov–Smirnov tests and binomial
//!   intervals shared by every check.
//!
//! The `smalltime` binary in this crate is a thin front end over [`cli`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod clt;
pub mod error;
mod matrix;
pub mod models;
pub mod pricing;
pub mod quad;
pub mod simulate;
pub mod skew;
pub mod stats;

pub use error::{Error, Result};
pub use models::{Coordinates, JumpLaw, JumpSpec, ModelKind, ModelSpec};
pub use simulate::{McSample, Scheme, SimConfig};
