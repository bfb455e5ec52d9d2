//! Dense real linear algebra: pooled covariance, Cholesky solves and the
//! symmetric eigendecomposition behind the principal-component scores.

mod cholesky;
mod covariance;
mod eigen;
mod matrix;
pub mod summation;

pub use cholesky::Cholesky;
pub use covariance::{fit_covariance, quad_form, CovarianceModel, DEFAULT_RIDGE};
pub use eigen::{check_symmetric, sym_eigendecompose, SymmetricEigen, JACOBI_TOL, SYMMETRY_TOL};
pub use matrix::{dot, squared_norm, sub, Matrix};
