//! Evaluation quantities computed on ensemble snapshots.

use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};

/// Diagnostics recorded at one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticRecord {
    pub iteration: usize,
    pub epd: f64,
    pub test_fn_error: Option<f64>,
    pub w1: Option<f64>,
    pub modes_covered: Option<usize>,
    /// Mean of the test function over the particles.
    pub test_fn_mean: Option<f64>,
}

/// Empirical particle distance `sqrt(Σ_i Σ_j |θ_i - θ_j|^2)` over ordered pairs.
///
/// Uses the identity `Σ_i Σ_j |θ_i - θ_j|^2 = 2 M Σ_i |θ_i - θ̄|^2`.
pub fn epd(ensemble: &ParticleEnsemble) -> f64 {
    let mean = ensemble.mean();
    let spread: f64 = ensemble
        .particles()
        .map(|p| p.iter().zip(&mean).map(|(x, m)| (x - m) * (x - m)).sum::<f64>())
        .sum();
    (2.0 * ensemble.num_particles() as f64 * spread).sqrt()
}

/// `f(θ) = |θ|^2`, the squared-norm test function.
pub fn squared_norm_fn(theta: &[f64]) -> f64 {
    theta.iter().map(|v| v * v).sum()
}

/// Particle average of `f`.
pub fn test_fn_mean(ensemble: &ParticleEnsemble, f: impl Fn(&[f64]) -> f64) -> f64 {
    ensemble.particles().map(f).sum::<f64>() / ensemble.num_particles() as f64
}

/// `|(1/M) Σ_i f(θ_i) - reference_expectation|`.
pub fn test_fn_error(ensemble: &ParticleEnsemble, f: impl Fn(&[f64]) -> f64, reference_expectation: f64) -> f64 {
    (test_fn_mean(ensemble, f) - reference_expectation).abs()
}

/// Midpoint-quantile estimate of `W_1` between the samples and a reference law:
/// `(1/M) Σ_i |θ_(i) - Q_ref((i - 1/2) / M)|` over the sorted samples.
pub fn w1_empirical_1d(samples: &[f64], reference_quantile: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Precondition("W1 needs at least one sample".into()));
    }
    if let Some(x) = samples.iter().find(|x| !x.is_finite()) {
        return Err(Error::Domain(format!("sample {x} is not finite")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    let mut previous = f64::NEG_INFINITY;
    let mut total = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        let q = reference_quantile((i as f64 + 0.5) / m);
        if q.is_nan() || q < previous {
            return Err(Error::Domain(format!(
                "reference quantile is not monotone at u = {}",
                (i as f64 + 0.5) / m
            )));
        }
        previous = q;
        total += (x - q).abs();
    }
    Ok(total / m)
}

/// Number of `centers` with at least one particle within Euclidean distance `radius`.
pub fn mode_coverage(ensemble: &ParticleEnsemble, centers: &[Vec<f64>], radius: f64) -> usize {
    let r2 = radius * radius;
    centers
        .iter()
        .filter(|c| {
            ensemble
                .particles()
                .any(|p| p.iter().zip(c.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() <= r2)
        })
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn naive_epd(e: &ParticleEnsemble) -> f64 {
        let mut total = 0.0;
        for a in e.particles() {
            for b in e.particles() {
                total += a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
            }
        }
        total.sqrt()
    }

    #[test]
    fn epd_simple_cases() {
        let same = ParticleEnsemble::from_scalars(&[1.3; 5]).unwrap();
        assert_eq!(epd(&same), 0.0);
        let pair = ParticleEnsemble::from_rows(&[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        assert!((epd(&pair) - 5.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn epd_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in 1..4 {
            let rows: Vec<Vec<f64>> = (0..6).map(|_| (0..d).map(|_| rng.gen_range(-4.0..4.0)).collect()).collect();
            let e = ParticleEnsemble::from_rows(&rows).unwrap();
            let (a, b) = (epd(&e), naive_epd(&e));
            assert!((a - b).abs() <= 1e-12 * b);
        }
    }

    #[test]
    fn test_fn_error_cases() {
        let s5 = 5f64.sqrt();
        let e = ParticleEnsemble::from_scalars(&[s5, -s5]).unwrap();
        assert!(test_fn_error(&e, squared_norm_fn, 5.0) < 1e-14);
        let zero = ParticleEnsemble::from_scalars(&[0.0]).unwrap();
        assert_eq!(test_fn_error(&zero, squared_norm_fn, 5.0), 5.0);
    }

    #[test]
    fn test_fn_error_monte_carlo() {
        // Var(θ^2) = 4μ^2σ^2 + 2σ^4 = 18 for N(2, 1); 3 sd at 1e6 draws is 0.0127.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let draws: Vec<f64> = (0..1_000_000)
            .map(|_| 2.0 + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let e = ParticleEnsemble::from_scalars(&draws).unwrap();
        assert!(test_fn_error(&e, squared_norm_fn, 5.0) < 0.02);
    }

    #[test]
    fn w1_exact_quantiles_give_zero() {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let m = 40;
        let samples: Vec<f64> = (0..m).map(|i| normal.inverse_cdf((i as f64 + 0.5) / m as f64)).collect();
        assert_eq!(w1_empirical_1d(&samples, |u| normal.inverse_cdf(u)).unwrap(), 0.0);
    }

    #[test]
    fn w1_point_masses() {
        let w = w1_empirical_1d(&[1.5, 1.5, 1.5], |_| -0.5).unwrap();
        assert!((w - 2.0).abs() < 1e-15);
    }

    #[test]
    fn w1_matches_fine_grid_quadrature() {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut samples: Vec<f64> = (0..50).map(|_| rng.gen_range(-2.5..2.5)).collect();
        let est = w1_empirical_1d(&samples, |u| normal.inverse_cdf(u)).unwrap();
        // ∫_0^1 |Q_emp(u) - Q_ref((ceil(uM) - 1/2) / M)| du on a 1e5-point midpoint grid.
        samples.sort_by(f64::total_cmp);
        let m = samples.len();
        let grid = 100_000;
        let mut quad = 0.0;
        for g in 0..grid {
            let u = (g as f64 + 0.5) / grid as f64;
            let idx = ((u * m as f64).ceil() as usize).clamp(1, m) - 1;
            let q = normal.inverse_cdf((idx as f64 + 0.5) / m as f64);
            quad += (samples[idx] - q).abs();
        }
        quad /= grid as f64;
        assert!((est - quad).abs() < 1e-3, "est {est} quad {quad}");
    }

    #[test]
    fn w1_rejects_decreasing_quantile() {
        let r = w1_empirical_1d(&[0.0, 1.0, 2.0], |u| -u);
        assert!(matches!(r, Err(Error::Domain(_))));
        assert!(matches!(w1_empirical_1d(&[], |u| u), Err(Error::Precondition(_))));
    }

    #[test]
    fn mode_coverage_cases() {
        let centers = vec![vec![-1.0], vec![0.0], vec![1.0]];
        let far = ParticleEnsemble::from_scalars(&[5.0, 6.0]).unwrap();
        assert_eq!(mode_coverage(&far, &centers, 0.3), 0);
        let on = ParticleEnsemble::from_scalars(&[-1.0, 0.0, 1.0, 7.0]).unwrap();
        assert_eq!(mode_coverage(&on, &centers, 0.3), 3);
    }

    #[test]
    fn mode_coverage_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let xs: Vec<f64> = (0..30).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let centers: Vec<Vec<f64>> = (0..7).map(|_| vec![rng.gen_range(-3.0..3.0)]).collect();
        let e = ParticleEnsemble::from_scalars(&xs).unwrap();
        let mut naive = 0;
        for c in &centers {
            let mut hit = false;
            for x in &xs {
                if (x - c[0]).abs() <= 0.2 {
                    hit = true;
                }
            }
            naive += usize::from(hit);
        }
        assert_eq!(mode_coverage(&e, &centers, 0.2), naive);
    }

    proptest! {
        #[test]
        fn epd_invariances(xs in prop::collection::vec(-5.0f64..5.0, 2..20), shift in -10.0f64..10.0, scale in 0.1f64..4.0) {
            let e = ParticleEnsemble::from_scalars(&xs).unwrap();
            let base = epd(&e);
            let mut rev = xs.clone();
            rev.reverse();
            prop_assert!((epd(&ParticleEnsemble::from_scalars(&rev).unwrap()) - base).abs() <= 1e-10 * base.max(1.0));
            let moved: Vec<f64> = xs.iter().map(|x| x + shift).collect();
            prop_assert!((epd(&ParticleEnsemble::from_scalars(&moved).unwrap()) - base).abs() <= 1e-9 * base.max(1.0));
            let centroid = xs.iter().sum::<f64>() / xs.len() as f64;
            let scaled: Vec<f64> = xs.iter().map(|x| centroid + scale * (x - centroid)).collect();
            prop_assert!((epd(&ParticleEnsemble::from_scalars(&scaled).unwrap()) - scale * base).abs() <= 1e-9 * base.max(1.0));
        }

        #[test]
        fn w1_against_own_empirical_quantile(xs in prop::collection::vec(-5.0f64..5.0, 1..40)) {
            let mut sorted = xs.clone();
            sorted.sort_by(f64::total_cmp);
            let m = sorted.len();
            let empirical = |u: f64| sorted[((u * m as f64).ceil() as usize).clamp(1, m) - 1];
            prop_assert!(w1_empirical_1d(&xs, empirical).unwrap() < 1e-12);
        }

        #[test]
        fn coverage_monotone_in_radius(xs in prop::collection::vec(-3.0f64..3.0, 1..15), r in 0.01f64..1.0, extra in 0.0f64..1.0) {
            let e = ParticleEnsemble::from_scalars(&xs).unwrap();
            let centers: Vec<Vec<f64>> = (-3..=3).map(|c| vec![c as f64]).collect();
            prop_assert!(mode_coverage(&e, &centers, r) <= mode_coverage(&e, &centers, r + extra));
        }

        #[test]
        fn test_fn_error_permutation_invariant(xs in prop::collection::vec(-5.0f64..5.0, 1..20)) {
            let e = ParticleEnsemble::from_scalars(&xs).unwrap();
            let mut rev = xs.clone();
            rev.reverse();
            let r = ParticleEnsemble::from_scalars(&rev).unwrap();
            let a = test_fn_error(&e, squared_norm_fn, 5.0);
            let b = test_fn_error(&r, squared_norm_fn, 5.0);
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
