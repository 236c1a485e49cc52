use thiserror::Error;

use crate::model::ValidityReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("sigma2 is below the admissible minimum {min_required}")]
    SigmaTooSmall { min_required: f64 },

    #[error("matrix is not conditionally negative definite (eigenvalue {eigenvalue} on the centered subspace)")]
    NotConditionallyNegDef { eigenvalue: f64 },

    #[error("supremum of x'Gx over x'1 = 1 is unbounded")]
    Unbounded,

    #[error("matrix is singular or too ill-conditioned (reciprocal condition {rcond:e})")]
    SingularInput { rcond: f64 },

    #[error("11' - A is not invertible: |1'A^-1 1 - 1| = {distance:e}")]
    NotInvertible { distance: f64 },

    #[error("model covariance is singular or too ill-conditioned (reciprocal condition {rcond:e})")]
    SingularModel { rcond: f64 },

    #[error("rejection sampler exhausted its budget: {accepted} accepted out of {draws} draws")]
    Timeout { accepted: usize, draws: u64 },

    #[error("variogram function produced an invalid variogram matrix")]
    InvalidVariogram(Box<ValidityReport>),
}
