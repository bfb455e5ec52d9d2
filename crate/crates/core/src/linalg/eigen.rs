//! Symmetric eigendecomposition by cyclic Jacobi rotations.

use crate::error::{Error, Result};
use crate::linalg::matrix::{dot, Matrix};

/// Relative tolerance for the symmetry precondition.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Convergence: off-diagonal Frobenius norm below this fraction of `||S||_F`.
pub const JACOBI_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// Eigenpairs of a symmetric matrix, eigenvalues non-increasing.
///
/// Eigenvectors are the columns of `eigenvectors`. The first component of
/// each eigenvector with magnitude above `1e-12` is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

impl SymmetricEigen {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `i`-th principal axis (0-based).
    pub fn axis(&self, i: usize) -> Vec<f64> {
        self.eigenvectors.column(i)
    }

    /// Coordinates of `v` in the eigenbasis, `y_i = u_i . v`.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut y = vec![0.0; d];
        // V^T v, walking V row by row so memory access stays contiguous
        for (k, &vk) in v.iter().enumerate() {
            if vk == 0.0 {
                continue;
            }
            for (yi, &u) in y.iter_mut().zip(self.eigenvectors.row(k)) {
                *yi += u * vk;
            }
        }
        y
    }

    /// `V diag(lambda) V^T`.
    pub fn reconstruct(&self) -> Matrix {
        let d = self.dim();
        let mut out = Matrix::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                let s: f64 = (0..d)
                    .map(|k| {
                        self.eigenvectors.get(i, k)
                            * self.eigenvalues[k]
                            * self.eigenvectors.get(j, k)
                    })
                    .sum();
                out.set(i, j, s);
                out.set(j, i, s);
            }
        }
        out
    }

    /// `v^T S^{-1} v` as `sum_i y_i^2 / lambda_i`. Components with
    /// `lambda_i <= floor * lambda_max` are skipped.
    pub fn quad_form(&self, v: &[f64], floor: f64) -> f64 {
        let cutoff = self.cutoff(floor);
        self.project(v)
            .iter()
            .zip(&self.eigenvalues)
            .filter(|(_, &l)| l > cutoff)
            .map(|(y, l)| y * y / l)
            .sum()
    }

    pub(crate) fn cutoff(&self, floor: f64) -> f64 {
        let lmax = self.eigenvalues.first().copied().unwrap_or(0.0);
        floor * lmax.max(0.0)
    }
}

/// Checks `|S_ij - S_ji| <= tol * max(1, max|S|)`.
pub fn check_symmetric(s: &Matrix, tol: f64) -> Result<()> {
    if !s.is_square() {
        return Err(Error::DimensionMismatch { expected: s.rows(), found: s.cols() });
    }
    let scale = s.max_abs().max(1.0);
    for i in 0..s.rows() {
        for j in (i + 1)..s.cols() {
            let gap = (s.get(i, j) - s.get(j, i)).abs();
            if gap > tol * scale {
                return Err(Error::NotSymmetric { row: i, col: j, gap });
            }
        }
    }
    Ok(())
}

/// Eigendecomposition of a symmetric matrix.
pub fn sym_eigendecompose(s: &Matrix) -> Result<SymmetricEigen> {
    check_symmetric(s, SYMMETRY_TOL)?;
    let d = s.rows();
    // symmetrize exactly so rotations see a symmetric input
    let mut a = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            a[i * d + j] = 0.5 * (s.get(i, j) + s.get(j, i));
        }
    }
    let mut vt = Matrix::identity(d).into_vec();

    let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let target = JACOBI_TOL * norm;
    let mut converged = false;
    for sweep in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a, d) <= target {
            converged = true;
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                // late sweeps: drop elements below the precision of both diagonals
                if sweep > 3 {
                    let g = 100.0 * apq.abs();
                    if a[p * d + p].abs() + g == a[p * d + p].abs() && a[q * d + q].abs() + g == a[q * d + q].abs() {
                        a[p * d + q] = 0.0;
                        a[q * d + p] = 0.0;
                        continue;
                    }
                }
                rotate(&mut a, &mut vt, d, p, q);
            }
        }
    }
    if !converged && off_diagonal_norm(&a, d) > target {
        return Err(Error::NoConvergence { sweeps: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| a[j * d + j].total_cmp(&a[i * d + i]).then(i.cmp(&j)));

    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[i * d + i]).collect();
    let mut vecs = Matrix::zeros(d, d);
    for (col, &src) in order.iter().enumerate() {
        let mut column: Vec<f64> = vt[src * d..(src + 1) * d].to_vec();
        let norm = dot(&column, &column).sqrt();
        if norm > 0.0 {
            column.iter_mut().for_each(|x| *x /= norm);
        }
        if let Some(first) = column.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                column.iter_mut().for_each(|x| *x = -*x);
            }
        }
        for (r, x) in column.into_iter().enumerate() {
            vecs.set(r, col, x);
        }
    }
    Ok(SymmetricEigen { eigenvalues, eigenvectors: vecs })
}

fn off_diagonal_norm(a: &[f64], d: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                s += a[i * d + j] * a[i * d + j];
            }
        }
    }
    s.sqrt()
}

/// One Jacobi rotation annihilating `a[p][q]`. `vt` holds the
/// accumulated eigenvectors as rows.
fn rotate(a: &mut [f64], vt: &mut [f64], d: usize, p: usize, q: usize) {
    let apq = a[p * d + q];
    if apq == 0.0 {
        return;
    }
    let app = a[p * d + p];
    let aqq = a[q * d + q];
    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta.is_finite() {
        let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
        sign / (theta.abs() + (theta * theta + 1.0).sqrt())
    } else {
        0.0
    };
    if t == 0.0 {
        a[p * d + q] = 0.0;
        a[q * d + p] = 0.0;
        return;
    }
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    // A <- P^T A P. Rows p and q are contiguous; the matching columns are
    // their mirror images.
    for k in 0..d {
        if k == p || k == q {
            continue;
        }
        let akp = a[p * d + k];
        let akq = a[q * d + k];
        let new_p = c * akp - s * akq;
        let new_q = s * akp + c * akq;
        a[p * d + k] = new_p;
        a[k * d + p] = new_p;
        a[q * d + k] = new_q;
        a[k * d + q] = new_q;
    }
    a[p * d + p] = c * c * app - 2.0 * c * s * apq + s * s * aqq;
    a[q * d + q] = s * s * app + 2.0 * c * s * apq + c * c * aqq;
    a[p * d + q] = 0.0;
    a[q * d + p] = 0.0;
    // V <- V P, on the rows of V^T
    let (head, tail) = vt.split_at_mut(q * d);
    let (row_p, row_q) = (&mut head[p * d..(p + 1) * d], &mut tail[..d]);
    for (vp, vq) in row_p.iter_mut().zip(row_q.iter_mut()) {
        let (x, y) = (*vp, *vq);
        *vp = c * x - s * y;
        *vq = s * x + c * y;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_spd(d: usize, seed: u64) -> Matrix {
        // xorshift keeps the test independent of the crate's samplers
        let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let b = Matrix::new(d, d, (0..d * d).map(|_| next()).collect()).unwrap();
        b.transpose().matmul(&b).unwrap()
    }

    fn rel_frobenius(a: &Matrix, b: &Matrix) -> f64 {
        let diff: f64 = a
            .as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        diff / a.frobenius_norm().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn identity_has_unit_eigenvalues() {
        let e = sym_eigendecompose(&Matrix::identity(3)).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 1.0, 1.0]);
        assert_eq!(e.eigenvectors, Matrix::identity(3));
    }

    #[test]
    fn diagonal_is_sorted_descending() {
        let e = sym_eigendecompose(&Matrix::from_diagonal(&[1.0, 3.0])).unwrap();
        assert_eq!(e.eigenvalues, vec![3.0, 1.0]);
        assert_eq!(e.axis(0), vec![0.0, 1.0]);
        assert_eq!(e.axis(1), vec![1.0, 0.0]);

        let e = sym_eigendecompose(&Matrix::from_diagonal(&[3.0, 1.0])).unwrap();
        assert_eq!(e.axis(0), vec![1.0, 0.0]);
        assert_eq!(e.axis(1), vec![0.0, 1.0]);
    }

    #[test]
    fn random_spd_reconstructs() {
        let a = random_spd(16, 7);
        let e = sym_eigendecompose(&a).unwrap();
        assert!(rel_frobenius(&a, &e.reconstruct()) < 1e-10);
    }

    #[test]
    fn rejects_asymmetric() {
        let s = Matrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]]).unwrap();
        assert!(matches!(sym_eigendecompose(&s), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn zero_matrix() {
        let e = sym_eigendecompose(&Matrix::zeros(3, 3)).unwrap();
        assert_eq!(e.eigenvalues, vec![0.0; 3]);
    }

    #[test]
    fn sign_convention_first_nonzero_positive() {
        let s = Matrix::from_rows(&[[2.0, -1.0], [-1.0, 2.0]]).unwrap();
        let e = sym_eigendecompose(&s).unwrap();
        for i in 0..2 {
            let axis = e.axis(i);
            let first = axis.iter().find(|x| x.abs() > 1e-12).unwrap();
            assert!(*first > 0.0);
        }
        assert!((e.eigenvalues[0] - 3.0).abs() < 1e-14);
        assert!((e.eigenvalues[1] - 1.0).abs() < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn trace_orthonormality_reconstruction(d in 1usize..20, seed in any::<u64>()) {
            let a = random_spd(d, seed);
            let e = sym_eigendecompose(&a).unwrap();
            let tr = a.trace();
            let sum: f64 = e.eigenvalues.iter().sum();
            prop_assert!((sum - tr).abs() <= 1e-8 * tr.abs().max(1e-300));
            for w in e.eigenvalues.windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
            let vvt = e.eigenvectors.matmul(&e.eigenvectors.transpose()).unwrap();
            let id = Matrix::identity(d);
            for (x, y) in vvt.as_slice().iter().zip(id.as_slice()) {
                prop_assert!((x - y).abs() < 1e-8);
            }
            prop_assert!(rel_frobenius(&a, &e.reconstruct()) < 1e-8);
        }
    }
}
