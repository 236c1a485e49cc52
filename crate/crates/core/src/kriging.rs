//! Distance-based variogram functions and plug-in Kriging prediction.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, RCOND_MIN};
use crate::model::{validate_variogram, CovarianceMatrix, ValidityReport, VariogramMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Exponential,
    Gaussian,
    Spherical,
    PureNugget,
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exponential" => Ok(Self::Exponential),
            "gaussian" => Ok(Self::Gaussian),
            "spherical" => Ok(Self::Spherical),
            "pure-nugget" | "nugget" => Ok(Self::PureNugget),
            other => Err(Error::InvalidInput(format!("unknown variogram family '{other}'"))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Exponential => "exponential",
            Self::Gaussian => "gaussian",
            Self::Spherical => "spherical",
            Self::PureNugget => "pure-nugget",
        })
    }
}

/// `gamma(0) = 0`, `gamma(0+) = nugget`, `gamma(d) -> sill`.
///
/// Ranges follow the practical-range convention: the exponential and Gaussian
/// families reach 95% of the partial sill at `d = range`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariogramFunctionModel {
    pub family: Family,
    pub nugget: f64,
    pub sill: f64,
    pub range: f64,
}

impl VariogramFunctionModel {
    pub fn new(family: Family, nugget: f64, sill: f64, range: f64) -> Result<Self> {
        if ![nugget, sill, range].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("variogram parameters must be finite".into()));
        }
        if nugget < 0.0 {
            return Err(Error::InvalidInput(format!("nugget must be >= 0, got {nugget}")));
        }
        if sill < nugget {
            return Err(Error::InvalidInput(format!("sill {sill} is below nugget {nugget}")));
        }
        if !(range > 0.0) {
            return Err(Error::InvalidInput(format!("range must be > 0, got {range}")));
        }
        Ok(Self {
            family,
            nugget,
            sill,
            range,
        })
    }

    pub fn eval(&self, d: f64) -> f64 {
        eval_variogram_fn(self, d)
    }
}

pub fn eval_variogram_fn(m: &VariogramFunctionModel, d: f64) -> f64 {
    if d <= 0.0 {
        return 0.0;
    }
    let h = d / m.range;
    let shape = match m.family {
        Family::Exponential => 1.0 - (-3.0 * h).exp(),
        Family::Gaussian => 1.0 - (-3.0 * h * h).exp(),
        Family::Spherical if h < 1.0 => 1.5 * h - 0.5 * h * h * h,
        Family::Spherical | Family::PureNugget => 1.0,
    };
    m.nugget + (m.sill - m.nugget) * shape
}

/// Points in Euclidean space, all of the same dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationSet {
    points: Vec<Vec<f64>>,
}

impl LocationSet {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(Error::InvalidInput("locations need at least one coordinate".into()));
        }
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidInput("locations have different dimensions".into()));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("location coordinates must be finite".into()));
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.points[i]
            .iter()
            .zip(&self.points[j])
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct LocationVariogram {
    pub gamma: VariogramMatrix,
    pub report: ValidityReport,
    pub warnings: Vec<String>,
}

/// `Gamma_ij = gamma(|x_i - x_j|)`, checked for validity rather than assumed.
pub fn gamma_from_locations(m: &VariogramFunctionModel, locs: &LocationSet) -> Result<LocationVariogram> {
    let n = locs.len();
    if n < 2 {
        return Err(Error::InvalidInput("need at least two locations".into()));
    }
    let mut duplicates = Vec::new();
    let g = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            return 0.0;
        }
        let d = locs.distance(i, j);
        if d == 0.0 && i < j {
            duplicates.push((i, j));
        }
        eval_variogram_fn(m, d)
    });
    let report = validate_variogram(&g, None)?;
    if !report.is_valid() {
        return Err(Error::InvalidVariogram(Box::new(report)));
    }
    let warnings = duplicates
        .iter()
        .map(|(i, j)| format!("DuplicateLocations: points {i} and {j} coincide"))
        .collect();
    Ok(LocationVariogram {
        gamma: VariogramMatrix::new(g)?,
        report,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrigePrediction {
    pub prediction: f64,
    pub variance: f64,
    /// `Sigma_II^-1 Sigma_I0`.
    pub weights: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Conditional mean and variance at the untried index 0 of `sigma_full`,
/// given observations `y_obs` at indices `1..`.
pub fn krige_predict(sigma_full: &CovarianceMatrix, y_obs: &DVector<f64>, mu: f64) -> Result<KrigePrediction> {
    let full = sigma_full.as_matrix();
    let n = full.nrows() - 1;
    if y_obs.len() != n {
        return Err(Error::InvalidInput(format!(
            "expected {n} observations for a {}x{} covariance, got {}",
            n + 1,
            n + 1,
            y_obs.len()
        )));
    }
    if !mu.is_finite() || y_obs.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("observations and mean must be finite".into()));
    }
    let s_ii = full.view((1, 1), (n, n)).into_owned();
    let s_i0 = full.view((1, 0), (n, 1)).column(0).into_owned();
    let eig = linalg::sym_eigenvalues(&s_ii);
    let hi = *eig.last().unwrap();
    let rc = if hi > 0.0 { eig[0] / hi } else { 0.0 };
    if !(rc >= RCOND_MIN) {
        return Err(Error::SingularInput { rcond: rc.max(0.0) });
    }
    let chol = s_ii.cholesky().ok_or(Error::SingularInput { rcond: rc })?;
    let weights = chol.solve(&s_i0);
    let prediction = mu + weights.dot(&y_obs.add_scalar(-mu));
    let raw_variance = full[(0, 0)] - s_i0.dot(&weights);
    let mut warnings = Vec::new();
    if raw_variance < -1e-10 {
        warnings.push(format!("negative prediction variance {raw_variance:e} clamped to 0"));
    }
    Ok(KrigePrediction {
        prediction,
        variance: raw_variance.max(0.0),
        weights: weights.iter().copied().collect(),
        warnings,
    })
}
