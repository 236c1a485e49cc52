mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use variogram::model::{covariance_from_gamma, gamma_from_sigma_r};
use variogram::projection::{
    centering_projector, empirical_variogram, estimate_model, project_samples, sigma0_from_gamma, simulate_field,
    simulate_model, variogram_of,
};
use variogram::{CorrelationMatrix, KrigeModel, SampleSet, VariogramMatrix};

fn random_gamma(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> (f64, VariogramMatrix) {
    let r = CorrelationMatrix::new(random_corr(rng, n)).unwrap();
    let sigma2 = uniform(rng, 0.5, 3.0);
    (sigma2, gamma_from_sigma_r(sigma2, &r).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sigma0_is_projected_covariance(n in 2usize..=15, seed in any::<u64>()) {
        let mut rng = rng(seed);
        let (sigma2, g) = random_gamma(&mut rng, n);
        let sigma = covariance_from_gamma(sigma2, &g).unwrap();
        let p = centering_projector(n).unwrap();
        let s0 = sigma0_from_gamma(&g).unwrap();
        let scale = sigma2.max(1.0);
        prop_assert!(max_abs_diff(s0.as_matrix(), &(&p * sigma.as_matrix() * &p)) < 1e-12 * scale);
        prop_assert!((s0.as_matrix() * DVector::from_element(n, 1.0)).amax() < 1e-12 * scale);
        prop_assert!(s0.kernel_residual() < 1e-12 * scale);
        let back = variogram_of(s0.as_matrix()).unwrap();
        prop_assert!(max_abs_diff(back.as_matrix(), g.as_matrix()) < 1e-12 * scale);
    }

    #[test]
    fn variogram_of_ignores_additive_shifts(n in 2usize..=10, seed in any::<u64>(), shift in -5.0f64..5.0) {
        // Cov(y + a 1 z) for an independent z adds a 11' which leaves the variogram unchanged
        let mut rng = rng(seed);
        let (sigma2, g) = random_gamma(&mut rng, n);
        let sigma = covariance_from_gamma(sigma2, &g).unwrap();
        let shifted = sigma.as_matrix() + ones_outer(n) * shift.abs();
        let back = variogram_of(&shifted).unwrap();
        prop_assert!(max_abs_diff(back.as_matrix(), g.as_matrix()) < 1e-12 * (sigma2 + shift.abs()).max(1.0));
    }

    #[test]
    fn projection_leaves_variogram_unchanged(n in 2usize..=8, count in 1usize..30, seed in any::<u64>()) {
        let mut rng = rng(seed);
        let data = DMatrix::from_fn(count, n, |_, _| normal(&mut rng) * 2.0 + 1.0);
        let s = SampleSet::new(data).unwrap();
        let p = project_samples(&s);
        for k in 0..count {
            prop_assert!(p.sample(k).sum().abs() < 1e-12 * n as f64 * 10.0);
        }
        let a = empirical_variogram(&s);
        let b = empirical_variogram(&p);
        prop_assert!(max_abs_diff(a.as_matrix(), b.as_matrix()) < 1e-10);
    }
}

#[test]
fn simulated_fields_lie_in_the_complement_of_one() {
    let mut rng = rng(21);
    for n in 2..10 {
        let (_, g) = random_gamma(&mut rng, n);
        let s = simulate_field(&g, 50, n as u64).unwrap();
        for k in 0..50 {
            assert!(s.sample(k).sum().abs() < 1e-10);
        }
    }
}

#[test]
fn empirical_variogram_is_unbiased() {
    let mut rng = rng(22);
    let n = 5;
    let (_, g) = random_gamma(&mut rng, n);
    let reps = 200;
    let count = 200;
    let mut mean = DMatrix::zeros(n, n);
    for rep in 0..reps {
        let s = simulate_field(&g, count, 1000 + rep).unwrap();
        mean += empirical_variogram(&s).as_matrix();
    }
    mean /= reps as f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let gij = g.as_matrix()[(i, j)];
            let se = gij * (2.0 / (count * reps as usize) as f64).sqrt();
            assert!(
                (mean[(i, j)] - gij).abs() <= 4.0 * se,
                "({i},{j}) {} vs {gij}",
                mean[(i, j)]
            );
        }
    }
}

#[test]
fn large_sample_recovery_within_standard_errors() {
    let g = VariogramMatrix::new(DMatrix::from_row_slice(
        4,
        4,
        &[
            0.0, 0.5, 1.0, 1.5, 0.5, 0.0, 0.5, 1.0, 1.0, 0.5, 0.0, 0.5, 1.5, 1.0, 0.5, 0.0,
        ],
    ))
    .unwrap();
    let count = 10_000;
    let s = simulate_field(&g, count, 42).unwrap();
    let est = empirical_variogram(&s);
    for i in 0..4 {
        for j in (i + 1)..4 {
            let gij = g.as_matrix()[(i, j)];
            let se = gij * (2.0 / count as f64).sqrt();
            assert!((est.as_matrix()[(i, j)] - gij).abs() <= 5.0 * se);
        }
    }
}

#[test]
fn estimate_recovers_mean_from_full_model() {
    let g = VariogramMatrix::new(DMatrix::from_row_slice(
        3,
        3,
        &[0.0, 0.4, 0.8, 0.4, 0.0, 0.4, 0.8, 0.4, 0.0],
    ))
    .unwrap();
    let model = KrigeModel::new(3.0, 1.5, g.clone()).unwrap();
    let s = simulate_model(&model, 20_000, 9).unwrap();
    let est = estimate_model(&s);
    // the grand mean has variance 1'Sigma1 / (n^2 N)
    let sigma = model.covariance_matrix();
    let se = (sigma.sum() / (9.0 * 20_000.0)).sqrt();
    assert!((est.mu_hat - 3.0).abs() < 5.0 * se);
    for (a, b) in est.gamma_hat.as_matrix().iter().zip(g.as_matrix().iter()) {
        assert!((a - b).abs() <= 5.0 * b * (2.0 / 20_000.0f64).sqrt() + 1e-15);
    }
}

#[test]
fn simulation_is_reproducible_by_seed() {
    let mut rng = rng(23);
    let (_, g) = random_gamma(&mut rng, 4);
    let a = simulate_field(&g, 10, 7).unwrap();
    let b = simulate_field(&g, 10, 7).unwrap();
    let c = simulate_field(&g, 10, 8).unwrap();
    assert_eq!(a.as_matrix(), b.as_matrix());
    assert_ne!(a.as_matrix(), c.as_matrix());
}
