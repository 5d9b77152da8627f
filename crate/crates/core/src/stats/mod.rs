//! Special functions and statistical tests shared by every verification.

mod interval;
mod ks;
mod special;

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

pub use interval::{prob_exceed, ProbEstimate};
pub use ks::{
    dkw_epsilon, kolmogorov_critical, ks_one_sample, ks_one_sample_at, ks_two_sample, Ecdf, KsReport, KS_LEVEL,
};
pub use special::{gamma_cdf, normal_cdf, normal_pdf, normal_quantile, normal_sf};

/// Seed of the fixed pseudo-random projection directions.
pub const CRAMER_WOLD_SEED: u64 = 0xC0FFEE;
pub const CRAMER_WOLD_RANDOM_DIRECTIONS: usize = 8;

/// Projection directions for testing a `dim`-variate law one dimension at a
/// time: the coordinate axes followed by 8 fixed pseudo-random unit vectors.
/// In one dimension every unit vector is `+-1`, so only the axis is returned.
pub fn cramer_wold_directions(dim: usize) -> Vec<Vec<f64>> {
    let mut dirs: Vec<Vec<f64>> =
        (0..dim).map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    if dim > 1 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(CRAMER_WOLD_SEED);
        for _ in 0..CRAMER_WOLD_RANDOM_DIRECTIONS {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            dirs.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    dirs
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn std_error(xs: &[f64]) -> f64 {
    (sample_variance(xs) / xs.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directions_are_unit_and_fixed() {
        let d = cramer_wold_directions(3);
        assert_eq!(d.len(), 3 + CRAMER_WOLD_RANDOM_DIRECTIONS);
        for v in &d {
            let n: f64 = v.iter().map(|x| x * x).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
        assert_eq!(d, cramer_wold_directions(3));
        assert_eq!(cramer_wold_directions(1), vec![vec![1.0]]);
    }

    proptest::proptest! {
        #[test]
        fn normal_cdf_symmetry_and_monotonicity(x in -10.0f64..10.0, h in 0.0f64..1.0) {
            proptest::prop_assert!((normal_cdf(x) + normal_cdf(-x) - 1.0).abs() <= 1e-12);
            proptest::prop_assert!(normal_cdf(x + h) >= normal_cdf(x));
        }

        #[test]
        fn gamma_cdf_monotone_with_unit_limit(shape in 0.5f64..1e3, scale in 0.01f64..100.0, u in 0.0f64..5.0, h in 0.0f64..1.0) {
            let x = u * shape * scale;
            let a = gamma_cdf(x, shape, scale).unwrap();
            let b = gamma_cdf(x + h * shape * scale, shape, scale).unwrap();
            proptest::prop_assert!(b >= a - 1e-15);
            let top = gamma_cdf(50.0 * shape * scale, shape, scale).unwrap();
            proptest::prop_assert!((top - 1.0).abs() <= 1e-10);
        }
    }
}
