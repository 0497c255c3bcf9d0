//! Dense numerical kernels shared by the detectors.
//!
//! Everything here is a pure function over immutable inputs except [`Rng`],
//! which is single-owner state. Matrices are small (a few hundred rows by a
//! handful of columns), so the routines favour clarity over blocking.

mod chi2;
mod eigen;
mod matrix;
mod rng;
mod stats;

pub use chi2::{chi2_cdf, chi2_quantile, regularized_lower_gamma};
pub use eigen::{pca_project, symmetric_eigen, Eigen, Pca};
pub(crate) use matrix::squared_distance;
pub use matrix::Matrix;
pub use rng::{Rng, DEFAULT_SEED};
pub use stats::{
    covariance, mahalanobis_d2, percentile, spd_summary, standardize, SpdSummary, Standardized,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("input contains NaN or infinite values")]
    NonFinite,
    #[error("column {0} has zero spread")]
    ConstantColumn(usize),
    #[error("need more rows than columns (rows = {rows}, cols = {cols})")]
    TooFewRows { rows: usize, cols: usize },
    #[error("covariance matrix is singular even after ridge regularisation")]
    Singular,
    #[error("empty input")]
    EmptyInput,
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
