//! Matrix helpers: Khatri-Rao products, strided GEMM over raw slices, and
//! the symmetric Gram-system solve used by the least-squares updates.

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::Matrix;

/// Relative eigenvalue threshold below which a Gram matrix is treated as
/// singular and inverted through its thresholded pseudo-inverse.
pub const PINV_THRESHOLD: f64 = 1e-12;

/// Column-wise Kronecker product. Row `b + rows(B) * a` of column `r` is
/// `A[a, r] * B[b, r]`, so B's row index varies fastest.
pub fn khatri_rao(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "Khatri-Rao operands have {} and {} columns",
            a.ncols(),
            b.ncols()
        )));
    }
    let (ia, ib) = (a.nrows(), b.nrows());
    let mut out = Matrix::zeros(ia * ib, a.ncols());
    for r in 0..a.ncols() {
        let (ca, cb) = (a.column(r), b.column(r));
        let mut co = out.column_mut(r);
        for i in 0..ia {
            let s = ca[i];
            for j in 0..ib {
                co[j + ib * i] = s * cb[j];
            }
        }
    }
    Ok(out)
}

/// `F_k ⊙ ... ⊙ F_2 ⊙ F_1` for `factors = [F_1, ..., F_k]`: the first
/// factor's row index varies fastest. An empty list yields a `1 x rank`
/// matrix of ones.
pub(crate) fn khatri_rao_colex(factors: &[&Matrix], rank: usize) -> Matrix {
    let mut acc = Matrix::from_element(1, rank, 1.0);
    for f in factors {
        acc = khatri_rao(f, &acc).expect("factor column counts checked by caller");
    }
    acc
}

/// Row-major/column-major agnostic view of a dense matrix inside a slice.
#[derive(Clone, Copy)]
pub(crate) struct Strided<'a> {
    pub data: &'a [f64],
    pub rows: usize,
    pub cols: usize,
    pub row_stride: usize,
    pub col_stride: usize,
}

impl<'a> Strided<'a> {
    pub fn col_major(data: &'a [f64], rows: usize, cols: usize) -> Self {
        Self {
            data,
            rows,
            cols,
            row_stride: 1,
            col_stride: rows,
        }
    }

    pub fn matrix(m: &'a Matrix) -> Self {
        Self::col_major(m.as_slice(), m.nrows(), m.ncols())
    }

    pub fn t(self) -> Self {
        Self {
            data: self.data,
            rows: self.cols,
            cols: self.rows,
            row_stride: self.col_stride,
            col_stride: self.row_stride,
        }
    }

    fn max_offset(&self) -> usize {
        if self.rows == 0 || self.cols == 0 {
            0
        } else {
            (self.rows - 1) * self.row_stride + (self.cols - 1) * self.col_stride
        }
    }
}

/// `C = A * B` into a fresh column-major matrix.
pub(crate) fn gemm(a: Strided<'_>, b: Strided<'_>) -> Matrix {
    assert_eq!(a.cols, b.rows, "inner dimensions");
    assert!(a.rows == 0 || a.cols == 0 || a.max_offset() < a.data.len());
    assert!(b.rows == 0 || b.cols == 0 || b.max_offset() < b.data.len());
    let (m, k, n) = (a.rows, a.cols, b.cols);
    let mut c = Matrix::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return c;
    }
    // SAFETY: the asserts above bound every offset matrixmultiply reads
    // through `a` and `b`; `c` is a freshly allocated m x n column-major
    // matrix with unit row stride and column stride m.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            a.row_stride as isize,
            a.col_stride as isize,
            b.data.as_ptr(),
            b.row_stride as isize,
            b.col_stride as isize,
            0.0,
            c.as_mut_slice().as_mut_ptr(),
            1,
            m as isize,
        );
    }
    c
}

/// Solves `H * G = M` for `H` with `G` symmetric positive semi-definite.
/// Returns the solution and whether the thresholded pseudo-inverse path
/// was taken.
pub(crate) fn solve_gram(gram: &Matrix, rhs: &Matrix) -> (Matrix, bool) {
    let eig = SymmetricEigen::new(gram.clone());
    let lmax = eig.eigenvalues.iter().copied().fold(0.0f64, f64::max);
    let lmin = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if lmax > 0.0 && lmin > PINV_THRESHOLD * lmax {
        if let Some(chol) = gram.clone().cholesky() {
            return (chol.solve(&rhs.transpose()).transpose(), false);
        }
    }
    let cutoff = PINV_THRESHOLD * lmax;
    let v = &eig.eigenvectors;
    let inv: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&l| if lmax > 0.0 && l > cutoff { 1.0 / l } else { 0.0 })
        .collect();
    let mut scaled = v.clone();
    for (j, s) in inv.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*s);
    }
    let pinv = &scaled * v.transpose();
    (rhs * pinv, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn khatri_rao_by_hand() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = Matrix::from_row_slice(2, 2, &[5.0, 6.0, 7.0, 8.0]);
        let k = khatri_rao(&a, &b).unwrap();
        assert_eq!(k.column(0).as_slice(), &[5.0, 7.0, 15.0, 21.0]);
        assert_eq!(k.column(1).as_slice(), &[12.0, 16.0, 24.0, 32.0]);
    }

    #[test]
    fn khatri_rao_identity_and_shapes() {
        let a = Matrix::from_fn(3, 2, |i, j| (i * 2 + j) as f64 + 0.5);
        let ones = Matrix::from_element(1, 2, 1.0);
        assert_eq!(khatri_rao(&a, &ones).unwrap(), a);
        assert_eq!(khatri_rao(&ones, &a).unwrap(), a);
        let b = Matrix::zeros(4, 2);
        assert_eq!(khatri_rao(&a, &b).unwrap().shape(), (12, 2));
        assert!(khatri_rao(&a, &Matrix::zeros(4, 3)).is_err());
    }

    #[test]
    fn gemm_handles_transposed_views() {
        let a = Matrix::from_fn(3, 4, |i, j| (i + 2 * j) as f64);
        let b = Matrix::from_fn(3, 2, |i, j| 1.0 + (i * j) as f64);
        let c = gemm(Strided::matrix(&a).t(), Strided::matrix(&b));
        assert_eq!(c, a.transpose() * &b);
    }

    #[test]
    fn solve_gram_full_rank_and_zero() {
        let g = Matrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let h = Matrix::from_row_slice(3, 2, &[1.0, 2.0, -1.0, 0.5, 0.0, 3.0]);
        let m = &h * &g;
        let (sol, singular) = solve_gram(&g, &m);
        assert!(!singular);
        assert!((sol - h).norm() < 1e-12);

        let (sol, singular) = solve_gram(&Matrix::zeros(2, 2), &Matrix::zeros(3, 2));
        assert!(singular);
        assert_eq!(sol, Matrix::zeros(3, 2));
    }
}
