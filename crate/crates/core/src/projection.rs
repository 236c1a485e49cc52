//! Representation of the model on `span(1)^perp`.
//!
//! Projecting `Y` with `P = I - (1/n) 11'` removes the mean and leaves a
//! Gaussian vector whose covariance `Sigma0 = -P Gamma P` depends on the
//! variogram only. This gives a mean-free estimator of `Gamma` and a way to
//! simulate data with a prescribed variogram.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{self, eig_tol, max_asymmetry, psd_sqrt, sym_eigenvalues, symmetrize, SYM_TOL};
use crate::model::{KrigeModel, VariogramMatrix};

/// `N` observation vectors of length `n`, stored one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet(DMatrix<f64>);

impl SampleSet {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() < 1 {
            return Err(Error::InvalidInput("sample set needs at least one sample".into()));
        }
        if data.ncols() < 2 {
            return Err(Error::InvalidInput("samples need dimension >= 2".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("samples contain non-finite values".into()));
        }
        Ok(Self(data))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput("samples have different lengths".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(DMatrix::from_row_slice(rows.len(), n, &flat))
    }

    /// Dimension of each sample.
    pub fn n(&self) -> usize {
        self.0.ncols()
    }

    /// Number of samples.
    pub fn count(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn sample(&self, k: usize) -> DVector<f64> {
        self.0.row(k).transpose()
    }

    /// `(1/N) sum_k y_k y_k'`.
    pub fn second_moment(&self) -> DMatrix<f64> {
        self.0.transpose() * &self.0 / self.count() as f64
    }
}

/// Covariance of the projected field; symmetric PSD with `1` in its kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredCovariance {
    matrix: DMatrix<f64>,
}

impl CenteredCovariance {
    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    /// Largest deviation of a diagonal entry from the diagonal mean. It is
    /// zero only when the correlation matrix has constant row sums.
    pub fn diagonal_spread(&self) -> f64 {
        let d = self.matrix.diagonal();
        let mean = d.mean();
        d.iter().fold(0.0f64, |acc, v| acc.max((v - mean).abs()))
    }

    /// `max |Sigma0 1|`.
    pub fn kernel_residual(&self) -> f64 {
        (&self.matrix * linalg::ones(self.n())).amax()
    }
}

/// `P = I - (1/n) 11'`, the orthogonal projector onto `span(1)^perp`.
pub fn centering_projector(n: usize) -> Result<DMatrix<f64>> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("projector needs n >= 2, got {n}")));
    }
    Ok(linalg::centering(n))
}

/// `Sigma0 = -P Gamma P`.
pub fn sigma0_from_gamma(gamma: &VariogramMatrix) -> Result<CenteredCovariance> {
    let p = linalg::centering(gamma.n());
    let s0 = symmetrize(&(-(&p * gamma.as_matrix() * &p)));
    let eig = sym_eigenvalues(&s0);
    if eig[0] < -eig_tol(&eig) {
        return Err(Error::NotConditionallyNegDef { eigenvalue: -eig[0] });
    }
    Ok(CenteredCovariance { matrix: s0 })
}

/// Variogram of a covariance: `gamma_ij = (s_ii + s_jj - 2 s_ij) / 2`. The
/// diagonal need not be constant.
pub fn variogram_of(sigma: &DMatrix<f64>) -> Result<VariogramMatrix> {
    linalg::require_square(sigma)?;
    if sigma.nrows() < 2 {
        return Err(Error::InvalidInput("covariance needs dimension >= 2".into()));
    }
    if max_asymmetry(sigma) > SYM_TOL {
        return Err(Error::InvalidInput("covariance is not symmetric".into()));
    }
    let eig = sym_eigenvalues(sigma);
    if eig[0] < -eig_tol(&eig) {
        return Err(Error::InvalidInput(format!(
            "covariance is not positive semidefinite (smallest eigenvalue {:e})",
            eig[0]
        )));
    }
    let n = sigma.nrows();
    let g = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            (0.5 * (sigma[(i, i)] + sigma[(j, j)]) - 0.5 * (sigma[(i, j)] + sigma[(j, i)])).max(0.0)
        }
    });
    Ok(VariogramMatrix::from_trusted(g))
}

/// Subtracts from each sample its own component mean.
pub fn project_samples(samples: &SampleSet) -> SampleSet {
    let mut out = samples.0.clone();
    for mut row in out.row_iter_mut() {
        let mean = row.mean();
        row.add_scalar_mut(-mean);
    }
    SampleSet(out)
}

/// `gamma_ij = (1 / 2N) sum_k (y_ki - y_kj)^2`.
pub fn empirical_variogram(samples: &SampleSet) -> VariogramMatrix {
    let n = samples.n();
    let scale = 0.5 / samples.count() as f64;
    let mut g = DMatrix::zeros(n, n);
    for row in samples.0.row_iter() {
        for i in 0..n {
            for j in (i + 1)..n {
                let d = row[i] - row[j];
                g[(i, j)] += d * d;
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            g[(i, j)] *= scale;
            g[(j, i)] = g[(i, j)];
        }
    }
    // an average of rank-one variograms -(y_i - y_j)^2/2 is conditionally negative definite
    VariogramMatrix::from_trusted(g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub mu_hat: f64,
    pub gamma_hat: VariogramMatrix,
}

/// Grand mean for `mu` and the empirical variogram of the projected samples.
pub fn estimate_model(samples: &SampleSet) -> Estimate {
    Estimate {
        mu_hat: samples.0.mean(),
        gamma_hat: empirical_variogram(&project_samples(samples)),
    }
}

/// Draws `count` samples of `N(0, Sigma0)`, each lying in `span(1)^perp`.
///
/// Uses the clamped symmetric square root of `Sigma0`, followed by `P` so the
/// component along `1` is removed to rounding.
pub fn simulate_field(gamma: &VariogramMatrix, count: usize, rng_seed: u64) -> Result<SampleSet> {
    let s0 = sigma0_from_gamma(gamma)?;
    let eig = sym_eigenvalues(s0.as_matrix());
    let root = linalg::centering(gamma.n()) * psd_sqrt(s0.as_matrix(), eig_tol(&eig));
    draw(&root, 0.0, count, rng_seed)
}

/// Draws `count` samples of `N(mu 1, sigma2 11' - Gamma)`.
pub fn simulate_model(model: &KrigeModel, count: usize, rng_seed: u64) -> Result<SampleSet> {
    let sigma = model.covariance_matrix();
    let eig = sym_eigenvalues(&sigma);
    let root = psd_sqrt(&sigma, eig_tol(&eig));
    draw(&root, model.mu(), count, rng_seed)
}

fn draw(root: &DMatrix<f64>, shift: f64, count: usize, seed: u64) -> Result<SampleSet> {
    if count == 0 {
        return Err(Error::InvalidInput("count must be at least 1".into()));
    }
    let n = root.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<f64> = (0..n * count).map(|_| StandardNormal.sample(&mut rng)).collect();
    let z = DMatrix::from_column_slice(n, count, &z);
    let mut y = (root * z).transpose();
    if shift != 0.0 {
        y.add_scalar_mut(shift);
    }
    SampleSet::new(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    fn flip(g: f64) -> VariogramMatrix {
        VariogramMatrix::new(DMatrix::from_row_slice(2, 2, &[0.0, g, g, 0.0])).unwrap()
    }

    #[test]
    fn projector_examples() {
        let p = centering_projector(2).unwrap();
        assert_eq!(p, DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]));
        let p = centering_projector(3).unwrap();
        assert!((&p * DVector::from_element(3, 7.5)).amax() < 1e-15);
        assert!(centering_projector(1).is_err());
    }

    #[test]
    fn sigma0_two_by_two() {
        let s0 = sigma0_from_gamma(&flip(3.0)).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.5, -1.5, -1.5, 1.5]);
        assert!(max_abs_diff(s0.as_matrix(), &expected) < 1e-15);
        let eig = sym_eigenvalues(s0.as_matrix());
        assert!(eig[0].abs() < 1e-15 && (eig[1] - 3.0).abs() < 1e-14);
        assert_eq!(s0.diagonal_spread(), 0.0);

        let s0 = sigma0_from_gamma(&VariogramMatrix::zeros(4)).unwrap();
        assert_eq!(s0.as_matrix(), &DMatrix::<f64>::zeros(4, 4));
    }

    #[test]
    fn variogram_of_identity() {
        let g = variogram_of(&DMatrix::identity(2, 2)).unwrap();
        assert_eq!(g.as_matrix(), flip(1.0).as_matrix());
        assert!(variogram_of(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
    }

    #[test]
    fn project_samples_examples() {
        let s = SampleSet::from_rows(&[vec![4.0, 4.0, 4.0], vec![1.0, 3.0, 2.0]]).unwrap();
        let p = project_samples(&s);
        assert_eq!(p.sample(0), DVector::zeros(3));
        assert_eq!(p.sample(1), DVector::from_vec(vec![-1.0, 1.0, 0.0]));
        let two = SampleSet::from_rows(&[vec![1.0, 3.0]]).unwrap();
        assert_eq!(project_samples(&two).sample(0), DVector::from_vec(vec![-1.0, 1.0]));
        assert_eq!(project_samples(&p), p);
    }

    #[test]
    fn empirical_variogram_examples() {
        let same = SampleSet::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        // identical samples still differ across components
        assert_eq!(empirical_variogram(&same).as_matrix()[(0, 1)], 0.5);
        let flat = SampleSet::from_rows(&[vec![3.0, 3.0, 3.0], vec![-1.0, -1.0, -1.0]]).unwrap();
        assert_eq!(empirical_variogram(&flat).as_matrix(), &DMatrix::<f64>::zeros(3, 3));
        let one = SampleSet::from_rows(&[vec![0.0, 2.0]]).unwrap();
        assert_eq!(empirical_variogram(&one).as_matrix()[(0, 1)], 2.0);
    }

    #[test]
    fn estimate_model_examples() {
        let s = SampleSet::from_rows(&[vec![5.0, 5.0, 5.0], vec![5.0, 5.0, 5.0]]).unwrap();
        let est = estimate_model(&s);
        assert_eq!(est.mu_hat, 5.0);
        assert!(est.gamma_hat.is_zero());

        let s = SampleSet::from_rows(&[vec![0.0, 2.0], vec![2.0, 0.0]]).unwrap();
        let est = estimate_model(&s);
        assert_eq!(est.mu_hat, 1.0);
        assert_eq!(est.gamma_hat.as_matrix()[(0, 1)], 2.0);
    }

    #[test]
    fn simulate_zero_variogram_gives_zero_samples() {
        let s = simulate_field(&VariogramMatrix::zeros(3), 5, 1).unwrap();
        assert!(s.as_matrix().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn simulate_is_reproducible_and_centered() {
        let g = flip(1.0);
        let a = simulate_field(&g, 100, 7).unwrap();
        let b = simulate_field(&g, 100, 7).unwrap();
        let c = simulate_field(&g, 100, 8).unwrap();
        assert!(a
            .as_matrix()
            .iter()
            .zip(b.as_matrix().iter())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_ne!(a, c);
        for k in 0..a.count() {
            assert!(a.sample(k).sum().abs() < 1e-8);
        }
        assert!(simulate_field(&g, 0, 7).is_err());
    }

    #[test]
    fn simulate_flip_recovers_unit_variogram() {
        let s = simulate_field(&flip(1.0), 50_000, 2024).unwrap();
        let g = empirical_variogram(&s).as_matrix()[(0, 1)];
        assert!((0.97..=1.03).contains(&g), "{g}");
    }
}
