//! Variogram-matrix parameterization of stationary Gaussian models.
//!
//! A first-order stationary Gaussian vector `Y ~ N(mu 1, sigma2 R)` can be
//! described either by its covariance `Sigma = sigma2 R`, or by the pair
//! `(sigma2, Gamma)` where `Gamma = sigma2 (11' - R)` is the variogram matrix.
//! This crate provides:
//!
//! - [`model`]: domain types and the `Sigma <-> (sigma2, Gamma) <-> (sigma2, R)` maps,
//!   plus validity checking of variogram matrices.
//! - [`inverse`]: Sherman-Morrison identities for `11' - A`, inverse variogram and
//!   concentration matrices, the log-likelihood in variogram terms and its
//!   directional derivatives.
//! - [`projection`]: the representation on the complement of the constant vectors,
//!   the empirical variogram estimator and field simulation.
//! - [`elliptope`]: membership, sections and prior samplers for correlation matrices.
//! - [`kriging`]: variogram functions of distance and Kriging prediction.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod elliptope;
pub mod error;
pub mod inverse;
pub mod kriging;
pub mod linalg;
pub mod model;
pub mod projection;

pub use error::{Error, Result};
pub use model::{CorrelationMatrix, CovarianceMatrix, KrigeModel, ValidityReport, VariogramMatrix};
pub use projection::SampleSet;
