//! Empirical distribution functions and Kolmogorov–Smirnov statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default significance level of every KS check.
pub const KS_LEVEL: f64 = 0.001;

/// Asymptotic Kolmogorov critical value `c(alpha) = sqrt(ln(2 / alpha) / 2)`
/// for the scaled statistic `sqrt(n) D_n`. `c(0.001) = 1.9495`.
pub fn kolmogorov_critical(level: f64) -> f64 {
    (0.5 * (2.0 / level).ln()).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsReport {
    pub statistic: f64,
    pub n: usize,
    /// Critical value at level 0.001.
    pub critical_001: f64,
    pub level: f64,
    /// Critical value at `level`.
    pub critical: f64,
    pub pass: bool,
}

impl KsReport {
    fn new(statistic: f64, n: usize, scale: f64, level: f64) -> Self {
        let critical = kolmogorov_critical(level) * scale;
        KsReport {
            statistic,
            n,
            critical_001: kolmogorov_critical(KS_LEVEL) * scale,
            level,
            critical,
            pass: statistic <= critical,
        }
    }
}

fn sorted_finite(sample: &[f64]) -> Result<Vec<f64>> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("sample contains non-finite values".into()));
    }
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// One-sample KS test against `cdf` at level 0.001.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsReport> {
    ks_one_sample_at(sample, cdf, KS_LEVEL)
}

pub fn ks_one_sample_at(sample: &[f64], cdf: impl Fn(f64) -> f64, level: f64) -> Result<KsReport> {
    let sorted = sorted_finite(sample)?;
    let n = sorted.len();
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        let above = (i + 1) as f64 / nf - f;
        let below = f - i as f64 / nf;
        d = d.max(above).max(below);
    }
    Ok(KsReport::new(d.clamp(0.0, 1.0), n, 1.0 / nf.sqrt(), level))
}

/// Two-sample KS test; `n` in the report is the combined size.
pub fn ks_two_sample(a: &[f64], b: &[f64], level: f64) -> Result<KsReport> {
    let a = sorted_finite(a)?;
    let b = sorted_finite(b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let scale = ((na + nb) / (na * nb)).sqrt();
    Ok(KsReport::new(d, a.len() + b.len(), scale, level))
}

/// Dvoretzky–Kiefer–Wolfowitz band half-width at the given confidence.
pub fn dkw_epsilon(n: usize, confidence: f64) -> f64 {
    ((2.0 / (1.0 - confidence)).ln() / (2.0 * n as f64)).sqrt()
}

/// Empirical distribution function of a finite sample.
#[derive(Debug, Clone)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(sample: &[f64]) -> Result<Self> {
        Ok(Ecdf { sorted: sorted_finite(sample)? })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Fraction of the sample `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    /// Fraction of the sample strictly above `x`.
    pub fn exceedance(&self, x: f64) -> f64 {
        1.0 - self.eval(x)
    }

    /// Lower empirical quantile, `p` in `[0, 1]`.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.sorted.len();
        let k = ((p * n as f64).ceil() as usize).clamp(1, n);
        self.sorted[k - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::normal_cdf;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn critical_value_at_default_level() {
        assert!((kolmogorov_critical(0.001) - 1.949).abs() < 1e-3);
    }

    #[test]
    fn constant_sample_against_normal() {
        let r = ks_one_sample(&[0.0, 0.0, 0.0], normal_cdf).unwrap();
        assert_eq!(r.statistic, 0.5);
        assert!(!r.pass || r.critical >= 0.5);
    }

    #[test]
    fn empty_sample_is_rejected() {
        assert!(matches!(ks_one_sample(&[], normal_cdf), Err(Error::EmptySample)));
        assert!(ks_one_sample(&[f64::NAN], normal_cdf).is_err());
    }

    #[test]
    fn null_calibration() {
        let s = normals(100_000, 3);
        let r = ks_one_sample(&s, normal_cdf).unwrap();
        assert!(r.pass, "{r:?}");
        assert!((r.critical_001 - 1.949 / (1e5f64).sqrt()).abs() < 1e-5);
    }

    #[test]
    fn detects_shifted_sample() {
        let s: Vec<f64> = normals(100_000, 4).into_iter().map(|z| z + 0.05).collect();
        assert!(!ks_one_sample(&s, normal_cdf).unwrap().pass);
    }

    #[test]
    fn two_sample_same_law_passes() {
        let r = ks_two_sample(&normals(50_000, 5), &normals(50_000, 6), KS_LEVEL).unwrap();
        assert!(r.pass, "{r:?}");
        let shifted: Vec<f64> = normals(50_000, 7).into_iter().map(|z| z * 1.1).collect();
        assert!(!ks_two_sample(&normals(50_000, 8), &shifted, KS_LEVEL).unwrap().pass);
    }

    #[test]
    fn ecdf_steps() {
        let e = Ecdf::new(&[3.0, 1.0, 2.0, 2.0]).unwrap();
        assert_eq!(e.eval(0.5), 0.0);
        assert_eq!(e.eval(2.0), 0.75);
        assert_eq!(e.exceedance(2.0), 0.25);
        assert_eq!(e.quantile(0.5), 2.0);
        assert_eq!(e.quantile(1.0), 3.0);
    }

    proptest::proptest! {
        #[test]
        fn statistic_invariant_under_affine_maps(
            seed in 0u64..1000, scale in 0.1f64..10.0, shift in -5.0f64..5.0
        ) {
            let s = normals(200, seed);
            let base = ks_one_sample(&s, normal_cdf).unwrap().statistic;
            let mapped: Vec<f64> = s.iter().map(|x| scale * x + shift).collect();
            let moved = ks_one_sample(&mapped, |y| normal_cdf((y - shift) / scale)).unwrap().statistic;
            proptest::prop_assert!((base - moved).abs() < 1e-12);
            proptest::prop_assert!((0.0..=1.0).contains(&base));
        }
    }
}
