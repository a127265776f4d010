//! Small dense row-major matrices with the handful of operations the
//! simulators need: products, pivoted-elimination rank, and Householder
//! least squares. Sizes here are tens of rows at most.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::scalar::Scalar;

#[derive(Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds a matrix from row vectors. Returns `None` on ragged input.
    pub fn from_rows(rows: &[Vec<T>]) -> Option<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return None;
        }
        Some(Self { rows: rows.len(), cols, data: rows.iter().flatten().copied().collect() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Submatrix keeping the listed columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut s = Self::zeros(self.rows, cols.len());
        for i in 0..self.rows {
            for (jj, &j) in cols.iter().enumerate() {
                s[(i, jj)] = self[(i, j)];
            }
        }
        s
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self[(i, l)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + a * other[(l, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "mul_vec dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// Row vector times matrix: `v · self`.
    pub fn vec_mul(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.rows, v.len(), "vec_mul dimension mismatch");
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| v[i] * self[(i, j)]).sum())
            .collect()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    /// Numerical rank by Gaussian elimination with full pivoting. Pivots
    /// below `rel_tol * max|entry|` count as zero.
    pub fn rank(&self, rel_tol: T) -> usize {
        let mut a = self.clone();
        let threshold = rel_tol * a.max_abs();
        if a.max_abs() == T::zero() {
            return 0;
        }
        let (m, n) = (a.rows, a.cols);
        let mut rank = 0;
        let mut col_perm: Vec<usize> = (0..n).collect();
        for step in 0..m.min(n) {
            // full pivot search over the trailing block
            let mut best = (step, step, T::zero());
            for i in step..m {
                for jj in step..n {
                    let v = a[(i, col_perm[jj])].abs();
                    if v > best.2 {
                        best = (i, jj, v);
                    }
                }
            }
            if best.2 <= threshold {
                break;
            }
            a.swap_rows(step, best.0);
            col_perm.swap(step, best.1);
            let pc = col_perm[step];
            let pivot = a[(step, pc)];
            for i in step + 1..m {
                let factor = a[(i, pc)] / pivot;
                if factor == T::zero() {
                    continue;
                }
                for &j in &col_perm[step..] {
                    a[(i, j)] = a[(i, j)] - factor * a[(step, j)];
                }
            }
            rank += 1;
        }
        rank
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    /// Least-squares solution of `self · x ≈ b` via Householder QR.
    ///
    /// Requires `rows >= cols`. Returns `None` when the matrix is numerically
    /// rank deficient (a diagonal entry of R below `rel_tol * max|entry|`).
    pub fn least_squares(&self, b: &[T], rel_tol: T) -> Option<Vec<T>> {
        let (m, n) = (self.rows, self.cols);
        assert_eq!(b.len(), m, "least_squares rhs length mismatch");
        if m < n {
            return None;
        }
        let mut r = self.clone();
        let mut qtb = b.to_vec();
        let threshold = rel_tol * self.max_abs();
        for k in 0..n {
            let norm = (k..m).map(|i| r[(i, k)] * r[(i, k)]).sum::<T>().sqrt();
            if norm <= threshold {
                return None;
            }
            let alpha = if r[(k, k)] > T::zero() { -norm } else { norm };
            let mut v: Vec<T> = (k..m).map(|i| r[(i, k)]).collect();
            v[0] = v[0] - alpha;
            let vnorm2: T = v.iter().map(|&x| x * x).sum();
            if vnorm2 == T::zero() {
                continue;
            }
            let two = T::lit(2.0);
            for j in k..n {
                let dot: T = (k..m).map(|i| v[i - k] * r[(i, j)]).sum();
                let s = two * dot / vnorm2;
                for i in k..m {
                    r[(i, j)] = r[(i, j)] - s * v[i - k];
                }
            }
            let dot: T = (k..m).map(|i| v[i - k] * qtb[i]).sum();
            let s = two * dot / vnorm2;
            for i in k..m {
                qtb[i] = qtb[i] - s * v[i - k];
            }
        }
        let mut x = vec![T::zero(); n];
        for k in (0..n).rev() {
            let mut acc = qtb[k];
            for j in k + 1..n {
                acc = acc - r[(k, j)] * x[j];
            }
            if r[(k, k)].abs() <= threshold {
                return None;
            }
            x[k] = acc / r[(k, k)];
        }
        Some(x)
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: fmt::Debug> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", &self.data[i * self.cols..(i + 1) * self.cols])?;
        }
        write!(f, "]")
    }
}

/// Iterates over all `size`-element subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, size: usize) -> impl Iterator<Item = Vec<usize>> {
    let mut current: Option<Vec<usize>> = if size <= n { Some((0..size).collect()) } else { None };
    std::iter::from_fn(move || {
        let out = current.clone()?;
        let cur = current.as_mut().unwrap();
        let mut i = size;
        loop {
            if i == 0 {
                current = None;
                break;
            }
            i -= 1;
            if cur[i] < n - size + i {
                cur[i] += 1;
                for j in i + 1..size {
                    cur[j] = cur[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_identity_and_duplicate_rows() {
        assert_eq!(Matrix::<f64>::identity(3).rank(1e-9), 3);
        let m = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0]]).unwrap();
        assert_eq!(m.rank(1e-9), 1);
        assert_eq!(Matrix::<f64>::zeros(2, 2).rank(1e-9), 0);
    }

    #[test]
    fn least_squares_recovers_exact_solution() {
        // overdetermined but consistent
        let a = Matrix::<f64>::from_rows(&[vec![1.0, 0.5], vec![0.0, 0.5], vec![1.0, 1.0], vec![2.0, -1.0]])
            .unwrap();
        let x = [3.0, -2.0];
        let b = a.mul_vec(&x);
        let sol = a.least_squares(&b, 1e-12).unwrap();
        assert!((sol[0] - 3.0).abs() < 1e-12);
        assert!((sol[1] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn least_squares_rejects_rank_deficient() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]]).unwrap();
        assert!(a.least_squares(&[1.0, 2.0, 3.0], 1e-9).is_none());
    }

    #[test]
    fn combinations_enumerate_in_order() {
        let all: Vec<_> = combinations(4, 2).collect();
        assert_eq!(all.len(), 6);
        assert_eq!(all[0], vec![0, 1]);
        assert_eq!(all[5], vec![2, 3]);
        assert_eq!(combinations(3, 0).count(), 1);
        assert_eq!(combinations(2, 3).count(), 0);
    }

    #[test]
    fn products_compose() {
        let a = Matrix::from_rows(&[vec![0.5, 0.5], vec![0.25, 0.75]]).unwrap();
        let i = Matrix::identity(2);
        assert_eq!(a.matmul(&i), a);
        assert_eq!(a.vec_mul(&[1.0, 0.0]), vec![0.5, 0.5]);
        assert_eq!(a.mul_vec(&[1.0, 1.0]), vec![1.0, 1.0]);
    }
}
