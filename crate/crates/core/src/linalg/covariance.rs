//! Class means and the shared within-class covariance.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::cholesky::Cholesky;
use crate::linalg::matrix::Matrix;
use crate::linalg::summation::{pairwise_accumulate, pairwise_add_vectors};

/// Default ridge, relative to the mean variance `trace(Sigma) / d`.
pub const DEFAULT_RIDGE: f64 = 1e-6;

/// Fitted class centroids, global centroid and pooled covariance.
///
/// `sigma` already contains the ridge term `ridge * trace(Sigma_mle) / d * I`;
/// `ridge_shift` records the absolute amount that was added to the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    pub class_means: Matrix,
    pub global_mean: Vec<f64>,
    pub sigma: Matrix,
    pub ridge: f64,
    pub ridge_shift: f64,
    pub counts: Vec<usize>,
    pub total: usize,
    factor: Option<Cholesky>,
}

impl CovarianceModel {
    /// Assembles a model from stored parts, re-deriving the factorization.
    pub fn from_parts(
        class_means: Matrix,
        global_mean: Vec<f64>,
        sigma: Matrix,
        ridge: f64,
        ridge_shift: f64,
        counts: Vec<usize>,
    ) -> Result<Self> {
        let d = sigma.rows();
        if !sigma.is_square() {
            return Err(Error::DimensionMismatch { expected: d, found: sigma.cols() });
        }
        if class_means.cols() != d || global_mean.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: class_means.cols() });
        }
        if class_means.rows() != counts.len() {
            return Err(Error::DimensionMismatch {
                expected: class_means.rows(),
                found: counts.len(),
            });
        }
        if global_mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("non-finite global mean"));
        }
        let total = counts.iter().sum();
        let factor = Cholesky::factor(&sigma).ok();
        Ok(CovarianceModel {
            class_means,
            global_mean,
            sigma,
            ridge,
            ridge_shift,
            counts,
            total,
            factor,
        })
    }

    pub fn dim(&self) -> usize {
        self.sigma.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.class_means.rows()
    }

    pub fn class_mean(&self, c: usize) -> &[f64] {
        self.class_means.row(c)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.factor.is_some()
    }

    /// Replaces `sigma` (and its factorization), keeping means and counts.
    pub fn with_sigma(mut self, sigma: Matrix) -> Result<Self> {
        if sigma.rows() != self.dim() || !sigma.is_square() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: sigma.rows() });
        }
        self.factor = Cholesky::factor(&sigma).ok();
        self.sigma = sigma;
        self.ridge_shift = 0.0;
        self.ridge = 0.0;
        Ok(self)
    }

    pub(crate) fn factor(&self) -> Result<&Cholesky> {
        match &self.factor {
            Some(f) => Ok(f),
            None => Err(Cholesky::factor(&self.sigma)
                .err()
                .unwrap_or(Error::NotPositiveDefinite { pivot: 0, value: 0.0 })),
        }
    }
}

/// Class-wise means, global mean and the pooled covariance
/// `Sigma = 1/N sum_c sum_{x in c} (x - mu_c)(x - mu_c)^T`, plus the ridge.
///
/// Sums are pairwise over rows in input order; per-class scatter matrices are
/// computed independently and reduced pairwise in class order, so the result
/// does not depend on the thread count.
pub fn fit_covariance(x: &Matrix, labels: &[usize], ridge: f64) -> Result<CovarianceModel> {
    let n = x.rows();
    let d = x.cols();
    if n == 0 {
        return Err(Error::invalid("at least one training row is required"));
    }
    if d == 0 {
        return Err(Error::invalid("embedding dimension must be at least 1"));
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: labels.len() });
    }
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::invalid(format!("ridge must be a finite non-negative number, got {ridge}")));
    }
    if let Some(pos) = x.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: pos / d, col: pos % d });
    }

    let k = labels.iter().max().map_or(0, |&m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &c) in labels.iter().enumerate() {
        members[c].push(i);
    }
    if let Some(c) = members.iter().position(Vec::is_empty) {
        return Err(Error::EmptyClass { class: c });
    }

    let class_means: Vec<Vec<f64>> = members.iter().map(|rows| mean_of(x, rows)).collect();
    let all: Vec<usize> = (0..n).collect();
    let global_mean = mean_of(x, &all);

    let tri = d * (d + 1) / 2;
    let scatters: Vec<Vec<f64>> = members
        .par_iter()
        .zip(class_means.par_iter())
        .map(|(rows, mu)| {
            pairwise_accumulate(rows.len(), tri, &|i, acc: &mut [f64]| {
                let r = x.row(rows[i]);
                let centered: Vec<f64> = r.iter().zip(mu).map(|(a, b)| a - b).collect();
                let mut p = 0;
                for a in 0..d {
                    let ca = centered[a];
                    for b in a..d {
                        acc[p] += ca * centered[b];
                        p += 1;
                    }
                }
            })
        })
        .collect();
    let scatter = pairwise_add_vectors(&scatters, tri);

    let mut sigma = Matrix::zeros(d, d);
    let mut p = 0;
    for a in 0..d {
        for b in a..d {
            let v = scatter[p] / n as f64;
            sigma.set(a, b, v);
            sigma.set(b, a, v);
            p += 1;
        }
    }
    let ridge_shift = ridge * sigma.trace() / d as f64;
    if ridge_shift != 0.0 {
        for a in 0..d {
            sigma.set(a, a, sigma.get(a, a) + ridge_shift);
        }
    }

    let counts = members.iter().map(Vec::len).collect();
    let class_means = Matrix::from_rows(&class_means)?;
    CovarianceModel::from_parts(class_means, global_mean, sigma, ridge, ridge_shift, counts)
}

fn mean_of(x: &Matrix, rows: &[usize]) -> Vec<f64> {
    let mut s = pairwise_accumulate(rows.len(), x.cols(), &|i, acc: &mut [f64]| {
        for (a, v) in acc.iter_mut().zip(x.row(rows[i])) {
            *a += v;
        }
    });
    let n = rows.len() as f64;
    s.iter_mut().for_each(|v| *v /= n);
    s
}

/// `v^T Sigma^{-1} v` through the Cholesky factor of the (ridged) covariance.
pub fn quad_form(model: &CovarianceModel, v: &[f64]) -> Result<f64> {
    model.factor()?.quad_form(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Matrix, Vec<usize>) {
        let x = Matrix::from_rows(&[[0.0, 0.0], [2.0, 0.0], [0.0, 1.0], [0.0, 3.0]]).unwrap();
        (x, vec![0, 0, 1, 1])
    }

    #[test]
    fn singleton_classes_have_zero_scatter() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        let m = fit_covariance(&x, &[0, 1], 0.0).unwrap();
        assert_eq!(m.sigma, Matrix::zeros(2, 2));
        assert_eq!(m.class_means, x);
        assert!(!m.is_positive_definite());
        assert!(matches!(quad_form(&m, &[1.0, 0.0]), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn hand_expanded_toy() {
        let (x, labels) = toy();
        let m = fit_covariance(&x, &labels, 0.0).unwrap();
        assert_eq!(m.class_mean(0), &[1.0, 0.0]);
        assert_eq!(m.class_mean(1), &[0.0, 2.0]);
        assert_eq!(m.global_mean, vec![0.5, 1.0]);
        let expected = Matrix::from_rows(&[[0.5, 0.0], [0.0, 0.5]]).unwrap();
        for (a, b) in m.sigma.as_slice().iter().zip(expected.as_slice()) {
            assert!((a - b).abs() <= 1e-9);
        }
        assert_eq!(m.counts, vec![2, 2]);
        assert_eq!(m.total, 4);
        assert!((quad_form(&m, &[0.0, 1.0]).unwrap() - 2.0).abs() <= 1e-9);
    }

    #[test]
    fn ridge_is_relative_to_mean_variance() {
        let x = Matrix::from_rows(&[[0.0, 1.0], [3.0, -1.0], [1.0, 2.0], [5.0, 0.5], [2.0, 2.0]])
            .unwrap();
        let labels = [0, 0, 1, 1, 1];
        let mle = fit_covariance(&x, &labels, 0.0).unwrap();
        let ridged = fit_covariance(&x, &labels, 0.1).unwrap();
        let s = mle.sigma.trace() / 2.0;
        for i in 0..2 {
            for j in 0..2 {
                let want = mle.sigma.get(i, j) + if i == j { 0.1 * s } else { 0.0 };
                assert_eq!(ridged.sigma.get(i, j), want);
            }
        }
        assert_eq!(ridged.ridge_shift, 0.1 * s);
    }

    #[test]
    fn quad_form_examples() {
        let m = fit_covariance(&Matrix::from_rows(&[[0.0, 0.0]]).unwrap(), &[0], 0.0)
            .unwrap()
            .with_sigma(Matrix::identity(2))
            .unwrap();
        assert_eq!(quad_form(&m, &[3.0, 4.0]).unwrap(), 25.0);
        let m = m.with_sigma(Matrix::from_diagonal(&[4.0, 1.0])).unwrap();
        assert_eq!(quad_form(&m, &[2.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn errors() {
        let x = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        assert!(matches!(fit_covariance(&x, &[0, 2], 0.0), Err(Error::EmptyClass { class: 1 })));
        assert!(fit_covariance(&x, &[0], 0.0).is_err());
        assert!(fit_covariance(&x, &[0, 0], -1.0).is_err());
        let empty = Matrix::new(0, 3, vec![]).unwrap();
        assert!(fit_covariance(&empty, &[], 0.0).is_err());
    }
}
