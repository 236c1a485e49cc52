//! The set of correlation matrices (the elliptope): membership, the `n = 3`
//! cross sections, the upper-triangular unit-row factor parameterization,
//! and three samplers for prior draws.
//!
//! For `n = 3` with off-diagonals `(x, y, z)` laid out as
//! `[[1, x, y], [x, 1, z], [y, z, 1]]`, membership is the cube `[-1, 1]^3`
//! intersected with `1 - x^2 - y^2 - z^2 + 2xyz >= 0`. Every horizontal
//! section `z = c` is the ellipse `x^2 + y^2 - 2cxy <= 1 - c^2` with area
//! `pi sqrt(1 - c^2)`, so the body has volume `pi^2 / 2`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eig_tol, require_square, sym_eigenvalues, DIAG_TOL};
use crate::model::CorrelationMatrix;

/// Absolute slack on the `n = 3` determinant cubic.
pub const CUBIC_TOL: f64 = 1e-12;

/// Draw budget for the rejection sampler.
pub const DEFAULT_MAX_DRAWS: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Elliptope3Point {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Elliptope3Point {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// `det [[1, x, y], [x, 1, z], [y, z, 1]]`.
    pub fn determinant(&self) -> f64 {
        let Self { x, y, z } = *self;
        1.0 - x * x - y * y - z * z + 2.0 * x * y * z
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let Self { x, y, z } = *self;
        DMatrix::from_row_slice(3, 3, &[1.0, x, y, x, 1.0, z, y, z, 1.0])
    }
}

pub fn elliptope3_contains(p: &Elliptope3Point) -> bool {
    let in_cube = [p.x, p.y, p.z].iter().all(|v| v.abs() <= 1.0 + CUBIC_TOL);
    in_cube && p.determinant() >= -CUBIC_TOL
}

/// Membership for any `n` by the smallest eigenvalue. The diagonal must be 1.
pub fn elliptope_contains(r: &DMatrix<f64>) -> Result<bool> {
    require_square(r)?;
    if r.diagonal().iter().any(|d| (d - 1.0).abs() > DIAG_TOL) {
        return Err(Error::InvalidInput("matrix does not have unit diagonal".into()));
    }
    let eig = sym_eigenvalues(r);
    Ok(eig[0] >= -eig_tol(&eig))
}

/// The section `z = c` of the 3-elliptope: `x^2 + y^2 - 2cxy <= 1 - c^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipseSection {
    pub c: f64,
    /// Coefficients `(a, b, h)` of `a x^2 + b y^2 + h xy`.
    pub quadratic: [f64; 3],
    /// Right-hand side `1 - c^2`.
    pub bound: f64,
    /// Semi-axis along `(1, 1)` and along `(1, -1)`.
    pub semi_axes: [f64; 2],
    pub area: f64,
    pub boundary: Vec<[f64; 2]>,
}

impl EllipseSection {
    pub fn form(&self, x: f64, y: f64) -> f64 {
        let [a, b, h] = self.quadratic;
        a * x * x + b * y * y + h * x * y
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.form(x, y) <= self.bound + CUBIC_TOL
    }
}

/// Section at height `c` with `points` boundary samples, equally spaced in the
/// ellipse's angular parameter. At `|c| = 1` the ellipse collapses to a segment.
pub fn elliptope3_section(c: f64, points: usize) -> Result<EllipseSection> {
    if !(c.abs() <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "section height must lie in [-1, 1], got {c}"
        )));
    }
    // eigenvalues of [[1, -c], [-c, 1]] are 1 - c on (1,1) and 1 + c on (1,-1)
    let major = (1.0 + c).sqrt();
    let minor = (1.0 - c).sqrt();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let boundary = (0..points)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / points as f64;
            let (u, v) = (major * t.cos(), minor * t.sin());
            [h * (u + v), h * (u - v)]
        })
        .collect();
    Ok(EllipseSection {
        c,
        quadratic: [1.0, 1.0, -2.0 * c],
        bound: 1.0 - c * c,
        semi_axes: [major, minor],
        area: PI * major * minor,
        boundary,
    })
}

/// Upper-triangular factor with unit-norm rows and nonnegative diagonal,
/// parameterized by its strictly upper entries. The correlation matrix is the
/// Gram matrix of the rows, `R = T T'`, so `det R = prod_i T_ii^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyParam {
    n: usize,
    /// Strictly upper entries in row-major order: `t_12, ..., t_1n, t_23, ...`.
    upper: Vec<f64>,
}

impl CholeskyParam {
    pub fn new(n: usize, upper: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput("factor needs n >= 2".into()));
        }
        if upper.len() != n * (n - 1) / 2 {
            return Err(Error::InvalidInput(format!(
                "expected {} strictly upper entries for n = {n}, got {}",
                n * (n - 1) / 2,
                upper.len()
            )));
        }
        if upper.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("factor entries must be finite".into()));
        }
        let p = Self { n, upper };
        for i in 0..n {
            let sq: f64 = ((i + 1)..n).map(|j| p.get(i, j).powi(2)).sum();
            if sq > 1.0 + CUBIC_TOL {
                return Err(Error::InvalidInput(format!(
                    "row {i} has squared norm {sq} > 1 off the diagonal"
                )));
            }
        }
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    fn index(&self, i: usize, j: usize) -> usize {
        // rows before i contribute (n-1) + (n-2) + ... + (n-i) entries
        i * (2 * self.n - i - 1) / 2 + (j - i - 1)
    }

    /// Entry `t_ij` for `i < j`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(
            i < j && j < self.n,
            "({i}, {j}) is not strictly upper for n = {}",
            self.n
        );
        self.upper[self.index(i, j)]
    }

    /// Implied diagonal entry `sqrt(1 - sum_j t_ij^2)`.
    pub fn diagonal(&self, i: usize) -> f64 {
        let sq: f64 = ((i + 1)..self.n).map(|j| self.get(i, j).powi(2)).sum();
        (1.0 - sq).max(0.0).sqrt()
    }

    pub fn factor(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Less => self.get(i, j),
            std::cmp::Ordering::Equal => self.diagonal(i),
            std::cmp::Ordering::Greater => 0.0,
        })
    }

    /// Nonzero diagonal, i.e. the factor is unique and `R` is nonsingular.
    pub fn is_identifiable(&self) -> bool {
        (0..self.n).map(|i| self.diagonal(i)).product::<f64>() > 0.0
    }

    /// `prod_i T_ii^2`.
    pub fn det_r(&self) -> f64 {
        (0..self.n)
            .map(|i| 1.0 - ((i + 1)..self.n).map(|j| self.get(i, j).powi(2)).sum::<f64>())
            .product()
    }
}

pub fn cholesky_to_corr(p: &CholeskyParam) -> CorrelationMatrix {
    let t = p.factor();
    let mut r = &t * t.transpose();
    r.fill_diagonal(1.0);
    let r = (&r + r.transpose()) * 0.5;
    CorrelationMatrix::from_trusted(r)
}

/// Recovers the unique factor of a nonsingular correlation matrix.
///
/// With `J` the exchange matrix, `J R J = L L'` (lower Cholesky) gives the
/// upper factor `T = J L J`.
pub fn corr_to_cholesky(r: &CorrelationMatrix) -> Result<CholeskyParam> {
    let rm = r.as_matrix();
    let n = r.n();
    let det = rm.clone().lu().determinant();
    if !(det > 1e-12) {
        return Err(Error::SingularInput { rcond: det.max(0.0) });
    }
    let flipped = DMatrix::from_fn(n, n, |i, j| rm[(n - 1 - i, n - 1 - j)]);
    let l = flipped.cholesky().ok_or(Error::SingularInput { rcond: 0.0 })?.unpack();
    let mut upper = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            upper.push(l[(n - 1 - i, n - 1 - j)]);
        }
    }
    CholeskyParam::new(n, upper)
}

/// Result of the rejection sampler.
#[derive(Debug, Clone)]
pub struct RejectionOutcome {
    pub samples: Vec<CorrelationMatrix>,
    pub draws: u64,
    pub acceptance_rate: f64,
    /// The draw budget ran out before `count` samples were accepted.
    pub timed_out: bool,
}

impl RejectionOutcome {
    pub fn into_result(self) -> Result<Self> {
        if self.timed_out {
            Err(Error::Timeout {
                accepted: self.samples.len(),
                draws: self.draws,
            })
        } else {
            Ok(self)
        }
    }
}

/// Uniform draws on the elliptope: off-diagonals i.i.d. uniform on `[-1, 1]`,
/// kept when the matrix is positive definite.
pub fn sample_rejection(n: usize, count: usize, rng_seed: u64) -> Result<RejectionOutcome> {
    sample_rejection_with_budget(n, count, rng_seed, DEFAULT_MAX_DRAWS)
}

pub fn sample_rejection_with_budget(n: usize, count: usize, rng_seed: u64, max_draws: u64) -> Result<RejectionOutcome> {
    check_n(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut samples = Vec::with_capacity(count);
    let mut draws = 0u64;
    let mut m = DMatrix::identity(n, n);
    while samples.len() < count && draws < max_draws {
        draws += 1;
        for i in 0..n {
            for j in (i + 1)..n {
                let v: f64 = rng.random_range(-1.0..=1.0);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        // boundary has measure zero, so positive definiteness decides membership
        if m.clone().cholesky().is_some() {
            samples.push(CorrelationMatrix::from_trusted(m.clone()));
        }
    }
    let acceptance_rate = if draws == 0 {
        0.0
    } else {
        samples.len() as f64 / draws as f64
    };
    Ok(RejectionOutcome {
        timed_out: samples.len() < count,
        samples,
        draws,
        acceptance_rate,
    })
}

/// Gram draws: columns of a standard Gaussian `n x n` matrix normalized to unit
/// length, `R = A'A`.
pub fn sample_gram(n: usize, count: usize, rng_seed: u64) -> Result<Vec<CorrelationMatrix>> {
    check_n(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut a = DMatrix::zeros(n, n);
        let mut degenerate = false;
        for mut col in a.column_iter_mut() {
            let v = unit_vector(&mut rng, n);
            match v {
                Some(v) => col.copy_from(&v),
                None => degenerate = true,
            }
        }
        if degenerate {
            continue;
        }
        let mut r = a.transpose() * &a;
        r.fill_diagonal(1.0);
        let r = (&r + r.transpose()) * 0.5;
        out.push(CorrelationMatrix::from_trusted(r));
    }
    Ok(out)
}

/// Factor draws: row `i` of the unit-row factor is uniform on the upper
/// half-sphere of dimension `n - i`; the last row is fixed.
pub fn sample_cholesky(n: usize, count: usize, rng_seed: u64) -> Result<Vec<CorrelationMatrix>> {
    check_n(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut upper = Vec::with_capacity(n * (n - 1) / 2);
        let mut degenerate = false;
        for i in 0..(n - 1) {
            match unit_vector(&mut rng, n - i) {
                // component 0 is the diagonal, |v_0| keeps it nonnegative
                Some(v) => upper.extend(v.iter().skip(1)),
                None => degenerate = true,
            }
        }
        if degenerate {
            continue;
        }
        out.push(cholesky_to_corr(&CholeskyParam::new(n, upper)?));
    }
    Ok(out)
}

fn unit_vector(rng: &mut ChaCha8Rng, k: usize) -> Option<DVector<f64>> {
    let v: DVector<f64> = DVector::from_fn(k, |_, _| StandardNormal.sample(rng));
    let norm = v.norm();
    (norm > 1e-150).then(|| v / norm)
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "elliptope dimension must be >= 2, got {n}"
        )));
    }
    Ok(())
}
