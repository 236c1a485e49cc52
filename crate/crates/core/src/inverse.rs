//! Rank-one (Sherman-Morrison) identities for `11' - A` and what follows from
//! them: inverse variogram and concentration matrices, the Gaussian
//! log-likelihood in `(sigma2, Gamma)` terms, its directional derivatives along
//! zero-diagonal symmetric directions, and the stationarity residual.
//!
//! With `Sigma = sigma2 11' - Gamma` invertible,
//!
//! ```text
//! Gamma^-1 = -Sigma^-1 - (sigma^-2 - 1'Sigma^-1 1)^-1 Sigma^-1 11' Sigma^-1
//! Sigma^-1 = -Gamma^-1 - (sigma^-2 - 1'Gamma^-1 1)^-1 Gamma^-1 11' Gamma^-1
//! ```
//!
//! The scalar in the second identity has also been written as
//! `sigma^2 - 1'Gamma^-1 1`. Both forms are available through
//! [`RankOneScalar`]; checked against direct inversion on random instances,
//! only [`RankOneScalar::InverseVariance`] reproduces `Sigma^-1`, and it is the
//! one used by [`concentration_from_gamma`].

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, guarded_inverse, max_asymmetry, ones, rcond, require_square, RCOND_MIN};
use crate::model::{self, CorrelationMatrix, CovarianceMatrix, KrigeModel, VariogramMatrix};
use crate::projection::SampleSet;

/// Threshold under which the rank-one scalar is treated as zero.
const SCALAR_EPS: f64 = 1e-12;

/// `det(11' - A) = (-1)^n (1 - 1'A^-1 1) det A`.
pub fn sm_det(a: &DMatrix<f64>) -> Result<f64> {
    require_square(a)?;
    let inv = guarded_inverse(a)?;
    let n = a.nrows();
    let s = ones(n).dot(&(&inv * ones(n)));
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(sign * (1.0 - s) * a.clone().lu().determinant())
}

/// `(11' - A)^-1 = -A^-1 - (1 - 1'A^-1 1)^-1 A^-1 11' A^-1`.
pub fn sm_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    require_square(a)?;
    let inv = guarded_inverse(a)?;
    let u = &inv * ones(a.nrows());
    let s = ones(a.nrows()).dot(&u);
    let scalar = 1.0 - s;
    if scalar.abs() < SCALAR_EPS {
        return Err(Error::NotInvertible { distance: scalar.abs() });
    }
    // A^-1 1 1' A^-1 = u v' with v = A^-T 1
    let v = inv.transpose() * ones(a.nrows());
    Ok(-inv - (&u * v.transpose()) / scalar)
}

/// Spectral scalars of a nonsingular correlation matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralDiagnostics {
    pub trace_r: f64,
    pub det_r: f64,
    pub trace_r_inv: f64,
    pub one_rinv_one: f64,
}

impl SpectralDiagnostics {
    /// `|1'R^-1 1 - 1|`, which is never zero for a nonsingular correlation matrix.
    pub fn distance_from_one(&self) -> f64 {
        (self.one_rinv_one - 1.0).abs()
    }
}

pub fn spectral_diagnostics(r: &CorrelationMatrix) -> Result<SpectralDiagnostics> {
    let rm = r.as_matrix();
    let inv = guarded_inverse(rm)?;
    let n = r.n();
    Ok(SpectralDiagnostics {
        trace_r: rm.trace(),
        det_r: rm.clone().lu().determinant(),
        trace_r_inv: inv.trace(),
        one_rinv_one: ones(n).dot(&(&inv * ones(n))),
    })
}

/// Inverse variogram matrix from the covariance, via the rank-one identity.
pub fn gamma_inverse(sigma: &CovarianceMatrix) -> Result<DMatrix<f64>> {
    let sigma2 = sigma.variance();
    let prec = guarded_inverse(sigma.as_matrix())?;
    rank_one_flip(&prec, 1.0 / sigma2)
}

/// `-M - (c - 1'M1)^-1 M11'M` for symmetric `M`.
fn rank_one_flip(m: &DMatrix<f64>, c: f64) -> Result<DMatrix<f64>> {
    let u = m * ones(m.nrows());
    let scalar = c - u.sum();
    if scalar.abs() < SCALAR_EPS * c.abs().max(1.0) {
        return Err(Error::NotInvertible { distance: scalar.abs() });
    }
    Ok(-m - (&u * u.transpose()) / scalar)
}

/// Which scalar multiplies the rank-one correction when recovering `Sigma^-1`
/// from `Gamma^-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankOneScalar {
    /// `sigma^-2 - 1'Gamma^-1 1`.
    InverseVariance,
    /// `sigma^2 - 1'Gamma^-1 1`.
    Variance,
}

/// Concentration matrix `Sigma^-1` from `(Gamma, sigma2)`.
pub fn concentration_from_gamma(gamma: &VariogramMatrix, sigma2: f64) -> Result<DMatrix<f64>> {
    concentration_from_gamma_with(gamma, sigma2, RankOneScalar::InverseVariance)
}

pub fn concentration_from_gamma_with(
    gamma: &VariogramMatrix,
    sigma2: f64,
    form: RankOneScalar,
) -> Result<DMatrix<f64>> {
    let min_required = model::min_sigma2(gamma)?;
    if !(sigma2 > 0.0) || sigma2 < min_required - model::sigma2_slack(min_required) {
        return Err(Error::SigmaTooSmall { min_required });
    }
    let ginv = guarded_inverse(gamma.as_matrix())?;
    let c = match form {
        RankOneScalar::InverseVariance => 1.0 / sigma2,
        RankOneScalar::Variance => sigma2,
    };
    rank_one_flip(&ginv, c)
}

/// Log-density decomposition: `loglik = -(n/2) log 2pi - logdet_term/2 - quad_term/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodEval {
    pub loglik: f64,
    /// `log det Sigma`.
    pub logdet_term: f64,
    /// `(y - mu 1)' Sigma^-1 (y - mu 1)`.
    pub quad_term: f64,
}

impl LikelihoodEval {
    fn assemble(n: usize, logdet_term: f64, quad_term: f64) -> Self {
        Self {
            loglik: -0.5 * n as f64 * (2.0 * PI).ln() - 0.5 * logdet_term - 0.5 * quad_term,
            logdet_term,
            quad_term,
        }
    }
}

/// Gaussian log-likelihood of one observation under the model, evaluated at
/// `y - mu 1` through a Cholesky factorization of `Sigma = sigma2 11' - Gamma`.
pub fn loglik(y: &DVector<f64>, model: &KrigeModel) -> Result<LikelihoodEval> {
    let n = model.n();
    check_len(y, n)?;
    let sigma = model.covariance_matrix();
    guard_model(&sigma)?;
    let chol = sigma.cholesky().ok_or(Error::SingularModel { rcond: 0.0 })?;
    let centered = y.add_scalar(-model.mu());
    let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let z = chol
        .l()
        .solve_lower_triangular(&centered)
        .ok_or(Error::SingularModel { rcond: 0.0 })?;
    Ok(LikelihoodEval::assemble(n, logdet, z.norm_squared()))
}

/// The same log-likelihood computed only from `Gamma^-1`: the determinant as
/// `det(-Gamma) (1 - sigma2 1'Gamma^-1 1)` and the quadratic form through the
/// rank-one identity. Requires `Gamma` invertible.
pub fn loglik_variogram_route(y: &DVector<f64>, model: &KrigeModel) -> Result<LikelihoodEval> {
    let n = model.n();
    check_len(y, n)?;
    let g = model.gamma().as_matrix();
    let ginv = guarded_inverse(g)?;
    let sigma2 = model.sigma2();
    let u = &ginv * ones(n);
    let one_ginv_one = u.sum();

    let (sign, log_abs) = log_abs_det(&(-g));
    let factor = 1.0 - sigma2 * one_ginv_one;
    if sign * factor <= 0.0 {
        return Err(Error::SingularModel { rcond: 0.0 });
    }
    let logdet = log_abs + factor.abs().ln();

    let centered = y.add_scalar(-model.mu());
    let scalar = 1.0 / sigma2 - one_ginv_one;
    let quad = -centered.dot(&(&ginv * &centered)) - centered.dot(&u).powi(2) / scalar;
    Ok(LikelihoodEval::assemble(n, logdet, quad))
}

fn log_abs_det(m: &DMatrix<f64>) -> (f64, f64) {
    let lu = m.clone().lu();
    let mut sign: f64 = lu.p().determinant();
    let mut log_abs = 0.0;
    for d in lu.u().diagonal().iter() {
        if *d < 0.0 {
            sign = -sign;
        }
        log_abs += d.abs().ln();
    }
    (sign, log_abs)
}

/// Largest dimension for which cofactor expansion is evaluated.
pub const ADJUGATE_MAX_N: usize = 6;

/// Classical adjoint by cofactor expansion, `n <= 6` only.
pub fn adjugate(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    require_square(m)?;
    let n = m.nrows();
    if n > ADJUGATE_MAX_N {
        return Err(Error::InvalidInput(format!(
            "adjugate is limited to n <= {ADJUGATE_MAX_N}, got {n}"
        )));
    }
    if n == 1 {
        return Ok(DMatrix::from_element(1, 1, 1.0));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| {
        // adj(M)_ij = (-1)^(i+j) det(M without row j and column i)
        let minor = m.clone().remove_row(j).remove_column(i);
        let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
        sign * laplace_det(&minor)
    }))
}

fn laplace_det(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    match n {
        0 => 1.0,
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        _ => (0..n)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[(0, j)] * laplace_det(&m.clone().remove_row(0).remove_column(j))
            })
            .sum(),
    }
}

/// `det(sigma2 11' - Gamma) = det(-Gamma) + sigma2 1' adj(-Gamma) 1`, by
/// cofactor expansion (`n <= 6`). Returns the determinant, not its log.
pub fn det_by_adjugate(gamma: &VariogramMatrix, sigma2: f64) -> Result<f64> {
    let neg = -gamma.as_matrix();
    let adj = adjugate(&neg)?;
    let n = gamma.n();
    Ok(laplace_det(&neg) + sigma2 * ones(n).dot(&(&adj * ones(n))))
}

/// Directional derivative of `Gamma -> log det(11' - Gamma / sigma2)` along a
/// symmetric zero-diagonal `h`: `-tr(Sigma^-1 h)`.
pub fn d_logdet(gamma: &VariogramMatrix, sigma2: f64, h: &DMatrix<f64>) -> Result<f64> {
    check_direction(h, gamma.n())?;
    let prec = model_precision(gamma, sigma2)?;
    Ok(-(&prec * h).trace())
}

/// Directional derivative of `Gamma -> y'(11' - Gamma / sigma2)^-1 y` along `h`:
/// `sigma2 tr(Sigma^-1 y y' Sigma^-1 h)`.
pub fn d_quadform(y: &DVector<f64>, gamma: &VariogramMatrix, sigma2: f64, h: &DMatrix<f64>) -> Result<f64> {
    check_direction(h, gamma.n())?;
    check_len(y, gamma.n())?;
    let prec = model_precision(gamma, sigma2)?;
    let w = &prec * y;
    Ok(sigma2 * w.dot(&(h * &w)))
}

/// Stationarity residual `M = -Sigma^-1 + Sigma^-1 S Sigma^-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlResidual {
    pub matrix: DMatrix<f64>,
    /// Largest absolute off-diagonal entry of `matrix`.
    pub offdiag_norm: f64,
}

/// Residual of the likelihood normal equations for centered samples, with
/// `S` the average of `y y'`. Along `H = e_i e_j' + e_j e_i'` the derivative
/// of the mean log-likelihood is `-M_ij`, so `M` is diagonal exactly at a
/// stationary point in every zero-diagonal direction.
pub fn ml_residual(samples: &SampleSet, gamma: &VariogramMatrix, sigma2: f64) -> Result<MlResidual> {
    if samples.n() != gamma.n() {
        return Err(Error::InvalidInput(format!(
            "samples have dimension {}, variogram {}",
            samples.n(),
            gamma.n()
        )));
    }
    ml_residual_from_moment(&samples.second_moment(), gamma, sigma2)
}

pub fn ml_residual_from_moment(
    second_moment: &DMatrix<f64>,
    gamma: &VariogramMatrix,
    sigma2: f64,
) -> Result<MlResidual> {
    require_square(second_moment)?;
    if second_moment.nrows() != gamma.n() {
        return Err(Error::InvalidInput(
            "second moment and variogram dimensions differ".into(),
        ));
    }
    let prec = model_precision(gamma, sigma2)?;
    let matrix = -&prec + &prec * second_moment * &prec;
    let offdiag_norm = linalg::max_off_diagonal(&matrix);
    Ok(MlResidual { matrix, offdiag_norm })
}

fn model_precision(gamma: &VariogramMatrix, sigma2: f64) -> Result<DMatrix<f64>> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidInput(format!(
            "sigma2 must be positive and finite, got {sigma2}"
        )));
    }
    let sigma = DMatrix::from_element(gamma.n(), gamma.n(), sigma2) - gamma.as_matrix();
    guarded_inverse(&sigma).map_err(|e| match e {
        Error::SingularInput { rcond } => Error::SingularModel { rcond },
        other => other,
    })
}

fn guard_model(sigma: &DMatrix<f64>) -> Result<()> {
    let eig = linalg::sym_eigenvalues(sigma);
    let (lo, hi) = (eig[0], *eig.last().unwrap());
    let rc = if hi > 0.0 { lo / hi } else { 0.0 };
    if !(rc >= RCOND_MIN) {
        return Err(Error::SingularModel { rcond: rc.max(0.0) });
    }
    Ok(())
}

fn check_len(y: &DVector<f64>, n: usize) -> Result<()> {
    if y.len() != n {
        return Err(Error::InvalidInput(format!(
            "observation has length {}, model dimension {n}",
            y.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("observation has non-finite entries".into()));
    }
    Ok(())
}

fn check_direction(h: &DMatrix<f64>, n: usize) -> Result<()> {
    require_square(h)?;
    if h.nrows() != n {
        return Err(Error::InvalidInput(format!(
            "direction has dimension {}, expected {n}",
            h.nrows()
        )));
    }
    if max_asymmetry(h) > linalg::SYM_TOL || h.diagonal().amax() > linalg::DIAG_TOL {
        return Err(Error::InvalidInput(
            "direction must be symmetric with zero diagonal".into(),
        ));
    }
    Ok(())
}

/// Reciprocal condition number of `sigma2 11' - Gamma`, for callers that want
/// to inspect conditioning before evaluating the likelihood.
pub fn model_rcond(gamma: &VariogramMatrix, sigma2: f64) -> f64 {
    rcond(&(DMatrix::from_element(gamma.n(), gamma.n(), sigma2) - gamma.as_matrix()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, ones_outer};
    use crate::model::covariance_from_gamma;

    fn m(n: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(n, n, v)
    }

    fn flip2() -> DMatrix<f64> {
        m(2, &[0.0, 1.0, 1.0, 0.0])
    }

    #[test]
    fn sm_det_examples() {
        assert!((sm_det(&DMatrix::identity(2, 2)).unwrap() + 1.0).abs() < 1e-15);
        assert!(sm_det(&(DMatrix::identity(2, 2) * 2.0)).unwrap().abs() < 1e-15);
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let direct = (ones_outer(3) - &a).determinant();
        assert!((sm_det(&a).unwrap() - direct).abs() < 1e-12);
        assert!(matches!(
            sm_det(&DMatrix::zeros(2, 2)),
            Err(Error::SingularInput { .. })
        ));
    }

    #[test]
    fn sm_inverse_examples() {
        assert!(max_abs_diff(&sm_inverse(&DMatrix::identity(2, 2)).unwrap(), &flip2()) < 1e-15);
        assert!(matches!(
            sm_inverse(&(DMatrix::identity(2, 2) * 2.0)),
            Err(Error::NotInvertible { .. })
        ));
    }

    #[test]
    fn spectral_diagnostics_examples() {
        let d = spectral_diagnostics(&CorrelationMatrix::identity(3)).unwrap();
        assert_eq!(
            (d.trace_r, d.det_r, d.trace_r_inv, d.one_rinv_one),
            (3.0, 1.0, 3.0, 3.0)
        );

        let r = CorrelationMatrix::new(m(2, &[1.0, 0.5, 0.5, 1.0])).unwrap();
        let d = spectral_diagnostics(&r).unwrap();
        assert!((d.trace_r - 2.0).abs() < 1e-15);
        assert!((d.det_r - 0.75).abs() < 1e-15);
        assert!((d.trace_r_inv - 8.0 / 3.0).abs() < 1e-14);
        assert!((d.one_rinv_one - 4.0 / 3.0).abs() < 1e-14);

        let singular = CorrelationMatrix::new(ones_outer(2)).unwrap();
        assert!(matches!(
            spectral_diagnostics(&singular),
            Err(Error::SingularInput { .. })
        ));
    }

    #[test]
    fn gamma_inverse_of_identity_covariance() {
        let s = CovarianceMatrix::new(DMatrix::identity(2, 2)).unwrap();
        assert!(max_abs_diff(&gamma_inverse(&s).unwrap(), &flip2()) < 1e-15);

        let s = CovarianceMatrix::new(DMatrix::identity(3, 3) * 2.0).unwrap();
        let direct = ((ones_outer(3) - DMatrix::identity(3, 3)) * 2.0).try_inverse().unwrap();
        assert!(max_abs_diff(&gamma_inverse(&s).unwrap(), &direct) < 1e-12);
    }

    #[test]
    fn concentration_examples() {
        let g = VariogramMatrix::new(flip2()).unwrap();
        let c = concentration_from_gamma(&g, 1.0).unwrap();
        assert!(max_abs_diff(&c, &DMatrix::identity(2, 2)) < 1e-15);

        let g = VariogramMatrix::new((ones_outer(3) - DMatrix::identity(3, 3)) * 2.0).unwrap();
        let c = concentration_from_gamma(&g, 2.0).unwrap();
        assert!(max_abs_diff(&c, &(DMatrix::identity(3, 3) * 0.5)) < 1e-12);
    }

    #[test]
    fn variance_scalar_form_is_wrong_away_from_unit_variance() {
        let g = VariogramMatrix::new((ones_outer(3) - DMatrix::identity(3, 3)) * 2.0).unwrap();
        let c = concentration_from_gamma_with(&g, 2.0, RankOneScalar::Variance).unwrap();
        assert!(max_abs_diff(&c, &(DMatrix::identity(3, 3) * 0.5)) > 1e-3);
    }

    #[test]
    fn loglik_examples() {
        let model = KrigeModel::new(0.0, 1.0, VariogramMatrix::new(flip2()).unwrap()).unwrap();
        let ev = loglik(&DVector::zeros(2), &model).unwrap();
        assert!((ev.loglik + (2.0 * PI).ln()).abs() < 1e-15);

        let r = CorrelationMatrix::new(m(2, &[1.0, 0.3, 0.3, 1.0])).unwrap();
        let g = model::gamma_from_sigma_r(2.0, &r).unwrap();
        let model = KrigeModel::new(1.0, 2.0, g).unwrap();
        let ev = loglik(&DVector::from_vec(vec![1.0, 1.0]), &model).unwrap();
        assert_eq!(ev.quad_term, 0.0);
        let logdet = (4.0f64 * 0.91).ln();
        assert!((ev.loglik - (-(2.0 * PI).ln() - 0.5 * logdet)).abs() < 1e-14);
    }

    #[test]
    fn loglik_refuses_singular_model() {
        // Gamma = 0 gives Sigma = sigma2 11', rank one
        let model = KrigeModel::new(0.0, 1.0, VariogramMatrix::zeros(3)).unwrap();
        assert!(matches!(
            loglik(&DVector::zeros(3), &model),
            Err(Error::SingularModel { .. })
        ));
    }

    #[test]
    fn adjugate_determinant_expansion_matches_factorization() {
        let r = CorrelationMatrix::new(m(3, &[1.0, 0.4, -0.1, 0.4, 1.0, 0.2, -0.1, 0.2, 1.0])).unwrap();
        let g = model::gamma_from_sigma_r(1.3, &r).unwrap();
        let det = covariance_from_gamma(1.3, &g).unwrap().into_inner().determinant();
        assert!((det_by_adjugate(&g, 1.3).unwrap() - det).abs() < 1e-12);
        // the flip matrix: det(-G) = -1, 1'adj(-G)1 = 2, so det Sigma = -1 + 2 = 1
        let g = VariogramMatrix::new(flip2()).unwrap();
        assert!((det_by_adjugate(&g, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(adjugate(&DMatrix::identity(7, 7)).is_err());
    }

    #[test]
    fn d_logdet_examples() {
        let g = VariogramMatrix::new(flip2()).unwrap();
        assert_eq!(d_logdet(&g, 1.0, &DMatrix::zeros(2, 2)).unwrap(), 0.0);
        // Sigma = I so the derivative along H = Gamma is -tr(H) = 0;
        // log det(I - tH) = log(1 - t^2) is flat at t = 0
        assert_eq!(d_logdet(&g, 1.0, &flip2()).unwrap(), 0.0);
        assert!(d_logdet(&g, 1.0, &DMatrix::identity(2, 2)).is_err());
    }

    #[test]
    fn d_quadform_trivial_cases() {
        let g = VariogramMatrix::new(flip2()).unwrap();
        let y = DVector::from_vec(vec![0.3, -1.2]);
        assert_eq!(d_quadform(&y, &g, 1.0, &DMatrix::zeros(2, 2)).unwrap(), 0.0);
        assert_eq!(d_quadform(&DVector::zeros(2), &g, 1.0, &flip2()).unwrap(), 0.0);
    }

    #[test]
    fn ml_residual_vanishes_at_model_covariance() {
        let r = CorrelationMatrix::new(m(3, &[1.0, 0.4, 0.1, 0.4, 1.0, 0.2, 0.1, 0.2, 1.0])).unwrap();
        let g = model::gamma_from_sigma_r(1.5, &r).unwrap();
        let s = covariance_from_gamma(1.5, &g).unwrap();
        let res = ml_residual_from_moment(s.as_matrix(), &g, 1.5).unwrap();
        assert!(res.offdiag_norm <= 1e-10);

        let mut prev = f64::INFINITY;
        for eps in [0.04, 0.02, 0.01] {
            let mut pert = s.as_matrix().clone();
            pert[(0, 1)] += eps;
            pert[(1, 0)] += eps;
            let norm = ml_residual_from_moment(&pert, &g, 1.5).unwrap().offdiag_norm;
            assert!(norm > 0.0 && norm < prev);
            prev = norm;
        }
    }
}
