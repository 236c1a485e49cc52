//! Domain types and the parameter maps between covariance, correlation and
//! variogram matrices.
//!
//! Under first-order stationarity the covariance `Sigma` has constant diagonal
//! `sigma2`, and the variogram matrix is `Gamma = sigma2 11' - Sigma`. A nonzero
//! `Gamma` is the variogram of some `sigma2 R` exactly when it is symmetric with
//! zero diagonal, conditionally negative definite, and
//! `sup { x' Gamma x : x'1 = 1 } <= sigma2`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, eig_tol, max_abs, max_asymmetry, ones_outer, rcond, require_square, sym_eigenvalues, symmetrize, DIAG_TOL,
    SYM_TOL,
};

fn require_dim(m: &DMatrix<f64>, what: &str) -> Result<()> {
    require_square(m)?;
    if m.nrows() < 2 {
        return Err(Error::InvalidInput(format!("{what} needs dimension >= 2")));
    }
    Ok(())
}

/// Unit-diagonal positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix(DMatrix<f64>);

impl CorrelationMatrix {
    /// Validates `m`. Entries within tolerance of the constraints are snapped:
    /// the diagonal is set to exactly 1 and the matrix is symmetrized.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        require_dim(&m, "correlation matrix")?;
        let n = m.nrows();
        let asym = max_asymmetry(&m);
        if asym > SYM_TOL {
            return Err(Error::InvalidInput(format!(
                "correlation matrix is not symmetric (max |r_ij - r_ji| = {asym:e})"
            )));
        }
        for i in 0..n {
            if (m[(i, i)] - 1.0).abs() > DIAG_TOL {
                return Err(Error::InvalidInput(format!(
                    "correlation matrix diagonal entry {i} is {} (expected 1)",
                    m[(i, i)]
                )));
            }
        }
        let mut r = symmetrize(&m);
        for i in 0..n {
            r[(i, i)] = 1.0;
            for j in 0..n {
                if i != j {
                    let v = r[(i, j)];
                    if v.abs() > 1.0 + DIAG_TOL {
                        return Err(Error::InvalidInput(format!(
                            "correlation entry ({i},{j}) = {v} outside [-1, 1]"
                        )));
                    }
                    r[(i, j)] = v.clamp(-1.0, 1.0);
                }
            }
        }
        let eig = sym_eigenvalues(&r);
        if eig[0] < -eig_tol(&eig) {
            return Err(Error::InvalidInput(format!(
                "correlation matrix is not positive semidefinite (smallest eigenvalue {:e})",
                eig[0]
            )));
        }
        Ok(Self(r))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub(crate) fn from_trusted(m: DMatrix<f64>) -> Self {
        Self(m)
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

/// Positive semidefinite matrix with constant diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix(DMatrix<f64>);

impl CovarianceMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        require_dim(&m, "covariance matrix")?;
        let asym = max_asymmetry(&m);
        if asym > SYM_TOL {
            return Err(Error::InvalidInput(format!(
                "covariance matrix is not symmetric (max asymmetry {asym:e})"
            )));
        }
        let diag = m.diagonal();
        let mean = diag.mean();
        let spread = diag.iter().fold(0.0f64, |acc, d| acc.max((d - mean).abs()));
        if spread > DIAG_TOL {
            return Err(Error::InvalidInput(format!(
                "covariance diagonal is not constant (spread {spread:e})"
            )));
        }
        let m = symmetrize(&m);
        let eig = sym_eigenvalues(&m);
        if eig[0] < -eig_tol(&eig) {
            return Err(Error::InvalidInput(format!(
                "covariance matrix is not positive semidefinite (smallest eigenvalue {:e})",
                eig[0]
            )));
        }
        Ok(Self(m))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    /// Common variance, the mean of the diagonal.
    pub fn variance(&self) -> f64 {
        self.0.trace() / self.n() as f64
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

/// Symmetric, zero-diagonal, nonnegative, conditionally negative definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct VariogramMatrix(DMatrix<f64>);

impl VariogramMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        require_dim(&m, "variogram matrix")?;
        let n = m.nrows();
        let asym = max_asymmetry(&m);
        if asym > SYM_TOL {
            return Err(Error::InvalidInput(format!(
                "variogram matrix is not symmetric (max asymmetry {asym:e})"
            )));
        }
        let mut g = symmetrize(&m);
        for i in 0..n {
            if g[(i, i)].abs() > DIAG_TOL {
                return Err(Error::InvalidInput(format!(
                    "variogram diagonal entry {i} is {} (expected 0)",
                    g[(i, i)]
                )));
            }
            g[(i, i)] = 0.0;
        }
        let min_entry = g.min();
        if min_entry < -SYM_TOL {
            return Err(Error::InvalidInput(format!(
                "variogram matrix has a negative entry {min_entry}"
            )));
        }
        g.iter_mut().for_each(|v| *v = v.max(0.0));
        let (top, tol) = centered_top_eigenvalue(&g);
        if top > tol {
            return Err(Error::NotConditionallyNegDef { eigenvalue: top });
        }
        Ok(Self(g))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    /// Skips validation; callers guarantee the invariants by construction.
    pub(crate) fn from_trusted(m: DMatrix<f64>) -> Self {
        Self(m)
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        max_abs(&self.0) <= DIAG_TOL
    }
}

/// The triple `(mu, sigma2, Gamma)` describing `N(mu 1, sigma2 11' - Gamma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrigeModel {
    mu: f64,
    sigma2: f64,
    gamma: VariogramMatrix,
}

impl KrigeModel {
    pub fn new(mu: f64, sigma2: f64, gamma: VariogramMatrix) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::InvalidInput("mean must be finite".into()));
        }
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::InvalidInput(format!(
                "sigma2 must be positive and finite, got {sigma2}"
            )));
        }
        // checks the bound and the implied correlation matrix
        covariance_from_gamma(sigma2, &gamma)?;
        CorrelationMatrix::new(ones_outer(gamma.n()) - gamma.as_matrix() / sigma2)?;
        Ok(Self { mu, sigma2, gamma })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn gamma(&self) -> &VariogramMatrix {
        &self.gamma
    }

    pub fn n(&self) -> usize {
        self.gamma.n()
    }

    /// `sigma2 11' - Gamma`, with the diagonal exactly `sigma2`.
    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        covariance_raw(self.sigma2, self.gamma.as_matrix())
    }

    pub fn correlation(&self) -> CorrelationMatrix {
        let mut r = ones_outer(self.n()) - self.gamma.as_matrix() / self.sigma2;
        r.fill_diagonal(1.0);
        CorrelationMatrix(r)
    }
}

fn covariance_raw(sigma2: f64, gamma: &DMatrix<f64>) -> DMatrix<f64> {
    let mut s = gamma.map(|g| complement(sigma2, g).unwrap_or(sigma2 - g));
    s.fill_diagonal(sigma2);
    s
}

/// `sigma2 - g`, nudged by one ulp when needed so that `g + result == sigma2`
/// holds exactly in floating point. `None` when no neighbour works, which
/// happens when every candidate sum is a rounding tie away from `sigma2`.
fn complement(sigma2: f64, g: f64) -> Option<f64> {
    let c = sigma2 - g;
    [c, c.next_up(), c.next_down()].into_iter().find(|&c| g + c == sigma2)
}

/// Variogram entry within one ulp of `g` that has an exact [`complement`].
fn representable_entry(sigma2: f64, g: f64) -> f64 {
    [g, g.next_up(), g.next_down()]
        .into_iter()
        .find(|&g| g >= 0.0 && complement(sigma2, g).is_some())
        .unwrap_or(g)
}

/// Largest eigenvalue of `P Gamma P` (symmetrized) together with the slack used
/// to decide conditional negative definiteness.
fn centered_top_eigenvalue(g: &DMatrix<f64>) -> (f64, f64) {
    let p = linalg::centering(g.nrows());
    let eig = sym_eigenvalues(&(&p * symmetrize(g) * &p));
    (*eig.last().unwrap(), eig_tol(&eig))
}

/// `Gamma = sigma2 (11' - R)`.
pub fn gamma_from_sigma_r(sigma2: f64, r: &CorrelationMatrix) -> Result<VariogramMatrix> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidInput(format!(
            "sigma2 must be positive and finite, got {sigma2}"
        )));
    }
    let mut g = r
        .as_matrix()
        .map(|rho| representable_entry(sigma2, sigma2 * (1.0 - rho)));
    g.fill_diagonal(0.0);
    Ok(VariogramMatrix::from_trusted(g))
}

/// `Sigma = sigma2 11' - Gamma`, refusing `sigma2` below [`min_sigma2`].
pub fn covariance_from_gamma(sigma2: f64, gamma: &VariogramMatrix) -> Result<CovarianceMatrix> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidInput(format!(
            "sigma2 must be positive and finite, got {sigma2}"
        )));
    }
    let min_required = min_sigma2(gamma)?;
    if sigma2 < min_required - sigma2_slack(min_required) {
        return Err(Error::SigmaTooSmall { min_required });
    }
    Ok(CovarianceMatrix(covariance_raw(sigma2, gamma.as_matrix())))
}

pub(crate) fn sigma2_slack(min_required: f64) -> f64 {
    linalg::EIG_REL_TOL * min_required.abs().max(1.0)
}

/// Splits `Sigma` into `(tr Sigma / n, Sigma / (tr Sigma / n))`.
pub fn decompose_covariance(sigma: &CovarianceMatrix) -> Result<(f64, CorrelationMatrix)> {
    let sigma2 = sigma.variance();
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidInput(format!(
            "covariance trace must be positive, got mean variance {sigma2}"
        )));
    }
    let r = CorrelationMatrix::new(sigma.as_matrix() / sigma2)?;
    Ok((sigma2, r))
}

/// `sup { x' Gamma x : x'1 = 1 }`, the smallest admissible common variance.
pub fn min_sigma2(gamma: &VariogramMatrix) -> Result<f64> {
    sup_on_affine_hyperplane(gamma.as_matrix())
}

/// Same as [`min_sigma2`] for a raw symmetric matrix; the concavity
/// precondition is checked here.
fn sup_on_affine_hyperplane(g: &DMatrix<f64>) -> Result<f64> {
    let n = g.nrows();
    let g = symmetrize(g);
    let (top, tol) = centered_top_eigenvalue(&g);
    if top > tol {
        return Err(Error::NotConditionallyNegDef { eigenvalue: top });
    }

    // stationarity system [G 1; 1' 0] [x; lambda] = [0; 1]
    let mut kkt = DMatrix::zeros(n + 1, n + 1);
    kkt.view_mut((0, 0), (n, n)).copy_from(&g);
    for i in 0..n {
        kkt[(i, n)] = 1.0;
        kkt[(n, i)] = 1.0;
    }
    if rcond(&kkt) > 1e-12 {
        let mut rhs = DVector::zeros(n + 1);
        rhs[n] = 1.0;
        if let Some(sol) = kkt.lu().solve(&rhs) {
            let x = sol.rows(0, n).into_owned();
            return Ok(x.dot(&(&g * &x)));
        }
    }

    // reduced problem: x = 1/n + B w, B an orthonormal basis of span(1)^perp
    let basis = helmert_basis(n);
    let x0 = DVector::from_element(n, 1.0 / n as f64);
    let gx0 = &g * &x0;
    let c = x0.dot(&gx0);
    let b = basis.transpose() * &gx0;
    let reduced = basis.transpose() * &g * &basis;
    let eig = nalgebra::SymmetricEigen::new(symmetrize(&reduced));
    let eig_slack = eig_tol(eig.eigenvalues.as_slice());
    let lin_slack = linalg::EIG_REL_TOL * max_abs(&g).max(1.0);
    let mut value = c;
    for (k, mu) in eig.eigenvalues.iter().enumerate() {
        let proj = eig.eigenvectors.column(k).dot(&b);
        if *mu < -eig_slack {
            value += proj * proj / mu.abs();
        } else if proj.abs() > lin_slack {
            return Err(Error::Unbounded);
        }
    }
    Ok(value)
}

/// Orthonormal basis of `span(1)^perp` (Helmert contrasts), `n x (n-1)`.
fn helmert_basis(n: usize) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(n, n - 1);
    for k in 1..n {
        let norm = ((k * (k + 1)) as f64).sqrt();
        for i in 0..k {
            b[(i, k - 1)] = 1.0 / norm;
        }
        b[(k, k - 1)] = -(k as f64) / norm;
    }
    b
}

/// Outcome of one validity condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub passed: bool,
    /// The quantity tested: worst violation or the tested margin.
    pub value: f64,
    pub detail: String,
}

/// Result of checking a matrix against the variogram-matrix conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub n: usize,
    /// Symmetric with zero diagonal; `value` is the worst asymmetry or diagonal entry.
    pub symmetric_zero_diagonal: ConditionCheck,
    /// `value` is the largest eigenvalue of `P Gamma P`.
    pub conditionally_negative_definite: ConditionCheck,
    /// Present only when a `sigma2` was supplied; `value` is `sigma2 - min_sigma2`.
    pub sigma2_bound: Option<ConditionCheck>,
    /// `value` is the smallest entry.
    pub nonnegative_entries: ConditionCheck,
    pub min_sigma2: Option<f64>,
    /// `1' Gamma 1`, reported as a diagnostic.
    pub one_gamma_one: f64,
    pub warnings: Vec<String>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.symmetric_zero_diagonal.passed
            && self.conditionally_negative_definite.passed
            && self.nonnegative_entries.passed
            && self.sigma2_bound.as_ref().is_none_or(|c| c.passed)
    }
}

/// Checks a raw square matrix against every variogram condition. Failures are
/// reported, not returned as errors; only a non-square or non-finite input errors.
pub fn validate_variogram(gamma: &DMatrix<f64>, sigma2: Option<f64>) -> Result<ValidityReport> {
    require_square(gamma)?;
    let n = gamma.nrows();
    let mut warnings = Vec::new();

    let asym = max_asymmetry(gamma);
    let max_diag = gamma.diagonal().amax();
    let cond1 = ConditionCheck {
        passed: asym <= SYM_TOL && max_diag <= DIAG_TOL,
        value: asym.max(max_diag),
        detail: if asym > SYM_TOL {
            format!("not symmetric: max |g_ij - g_ji| = {asym:e}")
        } else if max_diag > DIAG_TOL {
            format!("nonzero diagonal: max |g_ii| = {max_diag:e}")
        } else {
            "symmetric with zero diagonal".into()
        },
    };

    let (top, tol) = centered_top_eigenvalue(gamma);
    let cond2 = ConditionCheck {
        passed: top <= tol,
        value: top,
        detail: if top <= tol {
            "conditionally negative definite".into()
        } else {
            format!("P Gamma P has positive eigenvalue {top:e}")
        },
    };

    let min_entry = gamma.min();
    let nonneg = ConditionCheck {
        passed: min_entry >= -SYM_TOL,
        value: min_entry,
        detail: if min_entry >= -SYM_TOL {
            "all entries nonnegative".into()
        } else {
            format!("negative entry {min_entry}")
        },
    };

    let min_s2 = if cond1.passed && cond2.passed {
        match sup_on_affine_hyperplane(gamma) {
            Ok(v) => Some(v),
            Err(Error::Unbounded) => {
                warnings.push("sup of x'Gx over x'1 = 1 is unbounded".into());
                None
            }
            Err(e) => {
                warnings.push(format!("min_sigma2 not computable: {e}"));
                None
            }
        }
    } else {
        None
    };

    let cond3 = sigma2.map(|s2| match min_s2 {
        Some(m) => {
            let passed = s2 > 0.0 && s2 >= m - sigma2_slack(m);
            ConditionCheck {
                passed,
                value: s2 - m,
                detail: if passed {
                    format!("sigma2 = {s2} >= min_sigma2 = {m}")
                } else {
                    format!("sigma2 = {s2} is below min_sigma2 = {m}")
                },
            }
        }
        None => ConditionCheck {
            passed: false,
            value: f64::NAN,
            detail: "min_sigma2 unavailable (earlier condition failed or supremum unbounded)".into(),
        },
    });

    if cond1.passed && max_abs(gamma) <= DIAG_TOL {
        warnings.push("degenerate: zero variogram matrix corresponds to R = 11'".into());
    }

    Ok(ValidityReport {
        n,
        symmetric_zero_diagonal: cond1,
        conditionally_negative_definite: cond2,
        sigma2_bound: cond3,
        nonnegative_entries: nonneg,
        min_sigma2: min_s2,
        one_gamma_one: gamma.sum(),
        warnings,
    })
}
