//! Binomial proportion estimates with Wilson score intervals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulate::McSample;
use crate::stats::normal_quantile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbEstimate {
    pub p_hat: f64,
    pub n: usize,
    pub successes: usize,
    pub ci_low: f64,
    pub ci_high: f64,
    pub confidence: f64,
}

impl ProbEstimate {
    pub fn wilson(successes: usize, n: usize, confidence: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptySample);
        }
        if successes > n {
            return Err(Error::Domain(format!("{successes} successes out of {n} trials")));
        }
        if !(confidence > 0.0 && confidence < 1.0) {
            return Err(Error::Domain(format!("confidence must lie in (0, 1), got {confidence}")));
        }
        let z = normal_quantile(0.5 + 0.5 * confidence)?;
        let nf = n as f64;
        let p = successes as f64 / nf;
        let z2 = z * z;
        let denom = 1.0 + z2 / nf;
        let center = (p + z2 / (2.0 * nf)) / denom;
        let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
        Ok(ProbEstimate {
            p_hat: p,
            n,
            successes,
            ci_low: (center - half).clamp(0.0, 1.0).min(p),
            ci_high: (center + half).clamp(0.0, 1.0).max(p),
            confidence,
        })
    }

    pub fn contains(&self, p: f64) -> bool {
        self.ci_low <= p && p <= self.ci_high
    }

    pub fn overlaps(&self, lo: f64, hi: f64) -> bool {
        self.ci_low <= hi && lo <= self.ci_high
    }

    /// Plug-in standard error `sqrt(p (1 - p) / n)`.
    pub fn std_error(&self) -> f64 {
        (self.p_hat * (1.0 - self.p_hat) / self.n as f64).sqrt()
    }
}

/// Fraction of rows whose `coordinate` is strictly above `level`.
pub fn prob_exceed(sample: &McSample, coordinate: usize, level: f64, confidence: f64) -> Result<ProbEstimate> {
    if coordinate >= sample.n_cols() {
        return Err(Error::ShapeMismatch(format!(
            "coordinate {coordinate} out of range for {} columns",
            sample.n_cols()
        )));
    }
    let hits = (0..sample.n_rows()).filter(|&i| sample.get(i, coordinate) > level).count();
    ProbEstimate::wilson(hits, sample.n_rows(), confidence)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};

    #[test]
    fn interval_brackets_estimate() {
        for (k, n) in [(0, 10), (10, 10), (3, 7), (500, 1000)] {
            let e = ProbEstimate::wilson(k, n, 0.95).unwrap();
            assert!(e.ci_low <= e.p_hat && e.p_hat <= e.ci_high);
            assert!(e.ci_low >= 0.0 && e.ci_high <= 1.0);
        }
        assert!(ProbEstimate::wilson(1, 0, 0.95).is_err());
        assert!(ProbEstimate::wilson(1, 10, 1.0).is_err());
    }

    #[test]
    fn wilson_coverage() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5EED);
        let reps = 1000;
        let n = 10_000;
        let covered = (0..reps)
            .filter(|_| {
                let hits = (0..n).filter(|_| rng.random::<f64>() < 0.3).count();
                ProbEstimate::wilson(hits, n, 0.95).unwrap().contains(0.3)
            })
            .count();
        assert!(covered >= 930, "coverage {covered}/{reps}");
    }
}
