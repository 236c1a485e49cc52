//! Test-only generators and independent oracles.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| normal(rng))
}

/// Gram matrix of `n` unit columns in dimension `rows`; larger `rows` gives
/// better conditioned matrices.
pub fn random_corr_raw(rng: &mut ChaCha8Rng, n: usize, rows: usize) -> DMatrix<f64> {
    let mut a = DMatrix::from_fn(rows, n, |_, _| normal(rng));
    for mut c in a.column_iter_mut() {
        let norm = c.norm();
        c /= norm;
    }
    let mut r = a.transpose() * &a;
    r.fill_diagonal(1.0);
    (&r + r.transpose()) * 0.5
}

pub fn random_corr(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    random_corr_raw(rng, n, 3 * n)
}

/// Random symmetric zero-diagonal direction.
pub fn random_direction(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = normal(rng);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

pub fn ones_outer(n: usize) -> DMatrix<f64> {
    DMatrix::from_element(n, n, 1.0)
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

/// Leibniz expansion over all permutations.
pub fn permutation_det(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut total = 0.0;
    permute(m, &mut perm, 0, &mut total);
    total
}

fn permute(m: &DMatrix<f64>, perm: &mut Vec<usize>, k: usize, total: &mut f64) {
    let n = perm.len();
    if k == n {
        let mut inversions = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                if perm[i] > perm[j] {
                    inversions += 1;
                }
            }
        }
        let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
        *total += sign * (0..n).map(|i| m[(i, perm[i])]).product::<f64>();
        return;
    }
    for i in k..n {
        perm.swap(k, i);
        permute(m, perm, k + 1, total);
        perm.swap(k, i);
    }
}

/// Gaussian log-density from an explicit inverse and determinant.
pub fn gaussian_logpdf(y: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let n = y.len() as f64;
    let inv = cov.clone().try_inverse().expect("invertible covariance");
    let d = y - mean;
    let quad = d.dot(&(&inv * &d));
    -0.5 * n * (2.0 * std::f64::consts::PI).ln() - 0.5 * cov.determinant().ln() - 0.5 * quad
}

/// Central difference of `f` along `t`.
pub fn central_difference(f: impl Fn(f64) -> f64, step: f64) -> f64 {
    (f(step) - f(-step)) / (2.0 * step)
}

/// `|a - b| <= tol * max(|a|, floor)`.
pub fn rel_close(a: f64, b: f64, tol: f64, floor: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(floor)
}
