use crate::error::{Error, Result};
use crate::linalg::matrix::Matrix;

/// Lower-triangular factor `L` with `S = L L^T`, packed row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    dim: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    /// Factorizes a symmetric positive definite matrix. Only the lower
    /// triangle of `s` is read.
    pub fn factor(s: &Matrix) -> Result<Self> {
        if !s.is_square() {
            return Err(Error::DimensionMismatch { expected: s.rows(), found: s.cols() });
        }
        let d = s.rows();
        let mut l = vec![0.0; d * (d + 1) / 2];
        let idx = |i: usize, j: usize| i * (i + 1) / 2 + j;
        for i in 0..d {
            for j in 0..=i {
                let mut acc = s.get(i, j);
                for k in 0..j {
                    acc -= l[idx(i, k)] * l[idx(j, k)];
                }
                if i == j {
                    if !(acc > 0.0) || !acc.is_finite() {
                        return Err(Error::NotPositiveDefinite { pivot: i, value: acc });
                    }
                    l[idx(i, i)] = acc.sqrt();
                } else {
                    l[idx(i, j)] = acc / l[idx(j, j)];
                }
            }
        }
        Ok(Cholesky { dim: d, lower: l })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Solves `L z = v` by forward substitution.
    pub fn forward_solve(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: v.len() });
        }
        let mut z = vec![0.0; self.dim];
        for i in 0..self.dim {
            let row = &self.lower[i * (i + 1) / 2..i * (i + 1) / 2 + i + 1];
            let mut acc = v[i];
            for (k, zk) in z.iter().enumerate().take(i) {
                acc -= row[k] * zk;
            }
            z[i] = acc / row[i];
        }
        Ok(z)
    }

    /// `v^T S^{-1} v = |L^{-1} v|^2`.
    pub fn quad_form(&self, v: &[f64]) -> Result<f64> {
        let z = self.forward_solve(v)?;
        Ok(z.iter().map(|x| x * x).sum())
    }

    pub fn log_det(&self) -> f64 {
        (0..self.dim).map(|i| 2.0 * self.lower[i * (i + 1) / 2 + i].ln()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_quad_form_is_squared_norm() {
        let c = Cholesky::factor(&Matrix::identity(2)).unwrap();
        assert_eq!(c.quad_form(&[3.0, 4.0]).unwrap(), 25.0);
    }

    #[test]
    fn diagonal_rescaling() {
        let c = Cholesky::factor(&Matrix::from_diagonal(&[4.0, 1.0])).unwrap();
        assert_eq!(c.quad_form(&[2.0, 0.0]).unwrap(), 1.0);
        assert!((c.log_det() - 4.0_f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn singular_fails() {
        let s = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert!(matches!(Cholesky::factor(&s), Err(Error::NotPositiveDefinite { pivot: 1, .. })));
        assert!(Cholesky::factor(&Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn dense_solve_matches_known_inverse() {
        // S = [[4,2],[2,3]], S^{-1} = [[3,-2],[-2,4]] / 8
        let s = Matrix::from_rows(&[[4.0, 2.0], [2.0, 3.0]]).unwrap();
        let c = Cholesky::factor(&s).unwrap();
        let q = c.quad_form(&[1.0, 1.0]).unwrap();
        assert!((q - 3.0 / 8.0).abs() < 1e-15);
    }
}
