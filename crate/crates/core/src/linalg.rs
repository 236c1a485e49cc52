//! Small dense helpers shared by the numerical modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Absolute tolerance on symmetry.
pub const SYM_TOL: f64 = 1e-10;
/// Absolute tolerance on prescribed diagonal values.
pub const DIAG_TOL: f64 = 1e-10;
/// Relative slack applied to eigenvalue sign tests.
pub const EIG_REL_TOL: f64 = 1e-8;
/// Reciprocal condition number below which solves are refused.
pub const RCOND_MIN: f64 = 1e-14;

pub fn ones(n: usize) -> DVector<f64> {
    DVector::from_element(n, 1.0)
}

pub fn ones_outer(n: usize) -> DMatrix<f64> {
    DMatrix::from_element(n, n, 1.0)
}

/// `P = I - (1/n) 11'`, without the dimension check.
pub(crate) fn centering(n: usize) -> DMatrix<f64> {
    let mut p = DMatrix::from_element(n, n, -1.0 / n as f64);
    for i in 0..n {
        p[(i, i)] += 1.0;
    }
    p
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    max_abs(&(a - b))
}

pub fn max_off_diagonal(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                worst = worst.max(m[(i, j)].abs());
            }
        }
    }
    worst
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut eig: Vec<f64> = SymmetricEigen::new(symmetrize(m)).eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| a.total_cmp(b));
    eig
}

/// Scale-aware eigenvalue slack: `1e-8 * max(1, max |lambda|)`.
pub fn eig_tol(eigenvalues: &[f64]) -> f64 {
    let scale = eigenvalues.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    EIG_REL_TOL * scale
}

/// Reciprocal condition number in the 1-norm, `1 / (|A|_1 |A^-1|_1)`.
/// Returns 0 when LU cannot produce an inverse.
pub fn rcond(a: &DMatrix<f64>) -> f64 {
    match a.clone().lu().try_inverse() {
        Some(inv) => {
            let denom = norm1(a) * norm1(&inv);
            if denom.is_finite() && denom > 0.0 {
                1.0 / denom
            } else {
                0.0
            }
        }
        None => 0.0,
    }
}

fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse behind the conditioning guard.
pub fn guarded_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    require_square(a)?;
    let inv = a.clone().lu().try_inverse();
    let inv = inv.ok_or(Error::SingularInput { rcond: 0.0 })?;
    let rc = 1.0 / (norm1(a) * norm1(&inv));
    if !rc.is_finite() || rc < RCOND_MIN {
        return Err(Error::SingularInput {
            rcond: if rc.is_finite() { rc } else { 0.0 },
        });
    }
    Ok(inv)
}

pub(crate) fn require_square(a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::InvalidInput(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    Ok(())
}

/// Symmetric PSD square root with eigenvalues below `tol` clamped to zero.
pub fn psd_sqrt(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let roots = eig.eigenvalues.map(|l| if l > tol { l.sqrt() } else { 0.0 });
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}
