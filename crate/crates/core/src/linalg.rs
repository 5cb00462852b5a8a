//! Dense real matrices of desk scale (receiver arrays have at most a few
//! rows), with the exact factorizations the SIC detector needs: LU solves
//! with partial pivoting, explicit inverses, an infinity-norm reciprocal
//! condition estimate, and pseudo-inverses via the normal equations.

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r > 0 { rows[0].len() } else { 0 };
        Mat::from_fn(r, c, |i, j| rows[i][j])
    }

    /// Build a matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[Vec<f64>]) -> Self {
        let c = cols.len();
        let r = if c > 0 { cols[0].len() } else { 0 };
        Mat::from_fn(r, c, |i, j| cols[j][i])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mat_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "mat_vec shape mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// A^T * A, the Gram matrix of the columns.
    pub fn gram(&self) -> Mat {
        let mut g = Mat::zeros(self.cols, self.cols);
        for a in 0..self.cols {
            for b in a..self.cols {
                let mut s = 0.0;
                for i in 0..self.rows {
                    s += self[(i, a)] * self[(i, b)];
                }
                g[(a, b)] = s;
                g[(b, a)] = s;
            }
        }
        g
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Solve self * X = rhs for square self via LU with partial pivoting.
    /// Returns None when a pivot collapses to zero (exactly singular).
    pub fn solve(&self, rhs: &Mat) -> Option<Mat> {
        assert_eq!(self.rows, self.cols, "solve needs a square matrix");
        assert_eq!(self.rows, rhs.rows, "solve shape mismatch");
        let n = self.rows;
        let mut a = self.clone();
        let mut b = rhs.clone();
        for k in 0..n {
            // Partial pivoting: largest magnitude in column k at or below the diagonal.
            let mut piv = k;
            let mut best = a[(k, k)].abs();
            for i in (k + 1)..n {
                if a[(i, k)].abs() > best {
                    best = a[(i, k)].abs();
                    piv = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return None;
            }
            if piv != k {
                for j in 0..n {
                    let tmp = a[(k, j)];
                    a[(k, j)] = a[(piv, j)];
                    a[(piv, j)] = tmp;
                }
                for j in 0..b.cols {
                    let tmp = b[(k, j)];
                    b[(k, j)] = b[(piv, j)];
                    b[(piv, j)] = tmp;
                }
            }
            for i in (k + 1)..n {
                let factor = a[(i, k)] / a[(k, k)];
                if factor == 0.0 {
                    continue;
                }
                a[(i, k)] = 0.0;
                for j in (k + 1)..n {
                    a[(i, j)] -= factor * a[(k, j)];
                }
                for j in 0..b.cols {
                    b[(i, j)] -= factor * b[(k, j)];
                }
            }
        }
        // Back substitution.
        for k in (0..n).rev() {
            for j in 0..b.cols {
                let mut s = b[(k, j)];
                for m in (k + 1)..n {
                    s -= a[(k, m)] * b[(m, j)];
                }
                b[(k, j)] = s / a[(k, k)];
            }
        }
        Some(b)
    }

    pub fn inverse(&self) -> Option<Mat> {
        self.solve(&Mat::identity(self.rows))
    }

    /// Reciprocal condition number in the infinity norm,
    /// 1 / (‖A‖_inf · ‖A^-1‖_inf). Returns 0 for singular matrices.
    pub fn rcond_inf(&self) -> f64 {
        match self.inverse() {
            Some(inv) => {
                let denom = self.norm_inf() * inv.norm_inf();
                if denom.is_finite() && denom > 0.0 {
                    1.0 / denom
                } else {
                    0.0
                }
            }
            None => 0.0,
        }
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Reciprocal-condition floor below which a residual channel is treated as
/// rank-deficient.
pub const RCOND_THRESHOLD: f64 = 1e-12;

/// Moore-Penrose pseudo-inverse of a tall full-column-rank matrix via the
/// normal equations: (A^T A)^-1 A^T. The conditioning check is applied to
/// the Gram matrix, which is the matrix actually inverted.
pub fn pinv_normal_equations(a: &Mat) -> Result<Mat> {
    let g = a.gram();
    let rcond = g.rcond_inf();
    if rcond < RCOND_THRESHOLD {
        return Err(Error::InvalidParameter {
            name: "matrix",
            reason: format!(
                "rank-deficient columns: Gram reciprocal condition {:.3e} below {:.1e}",
                rcond, RCOND_THRESHOLD
            ),
        });
    }
    let g_inv = g.inverse().ok_or_else(|| Error::InvalidParameter {
        name: "matrix",
        reason: "Gram matrix exactly singular".to_string(),
    })?;
    Ok(g_inv.matmul(&a.transpose()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn solve_recovers_known_system() {
        // A = [[2,1],[1,3]], x = (1, -2) => b = (0, -5)
        let a = Mat::from_rows(&[&[2.0, 1.0], &[1.0, 3.0]]);
        let b = Mat::from_fn(2, 1, |i, _| [0.0, -5.0][i]);
        let x = a.solve(&b).unwrap();
        assert_relative_eq!(x[(0, 0)], 1.0, max_relative = 1e-12);
        assert_relative_eq!(x[(1, 0)], -2.0, max_relative = 1e-12);
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let a = Mat::from_rows(&[&[4.0, 2.0, 0.5], &[2.0, 5.0, 1.0], &[0.5, 1.0, 3.0]]);
        let inv = a.inverse().unwrap();
        let prod = a.matmul(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_matrix_reports_none_and_zero_rcond() {
        let a = Mat::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(a.inverse().is_none());
        assert_eq!(a.rcond_inf(), 0.0);
    }

    #[test]
    fn pinv_of_single_column_is_scaled_transpose() {
        // pinv(h) = h^T / ||h||^2
        let h = Mat::from_columns(&[vec![3.0, 4.0]]);
        let w = pinv_normal_equations(&h).unwrap();
        assert_eq!(w.rows(), 1);
        assert_eq!(w.cols(), 2);
        assert_relative_eq!(w[(0, 0)], 3.0 / 25.0, max_relative = 1e-12);
        assert_relative_eq!(w[(0, 1)], 4.0 / 25.0, max_relative = 1e-12);
    }

    #[test]
    fn pinv_left_inverse_property() {
        let a = Mat::from_rows(&[&[1.0, 0.2], &[0.3, 2.0], &[-0.5, 1.1], &[0.9, -0.4]]);
        let w = pinv_normal_equations(&a).unwrap();
        let prod = w.matmul(&a);
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn pinv_rejects_dependent_columns() {
        let a = Mat::from_columns(&[vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0]]);
        assert!(pinv_normal_equations(&a).is_err());
    }

    #[test]
    fn rcond_of_identity_is_one() {
        assert_relative_eq!(Mat::identity(4).rcond_inf(), 1.0, max_relative = 1e-12);
    }
}
